// SPDX-License-Identifier: Apache-2.0
#include "relmusic/model/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "relmusic/codec/note_io.hpp"
#include "relmusic/errors.hpp"

namespace relmusic::model {

namespace fs = std::filesystem;

std::size_t Corpus::total_tokens() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

Corpus load_corpus_dir(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw ConfigError("corpus directory '" + dir + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tok") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("corpus directory '" + dir + "' has no .tok files");
  Corpus corpus;
  for (const auto& f : files) {
    corpus.sequences.push_back(codec::read_tokens_file(f.string()));
    corpus.names.push_back(f.filename().string());
  }
  return corpus;
}

void save_corpus_dir(const Corpus& corpus, const std::string& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::string name = i < corpus.names.size() ? corpus.names[i] : std::to_string(i) + ".tok";
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw ConfigError("cannot write corpus file in '" + dir + "'");
    codec::write_tokens(out, corpus.sequences[i]);
  }
}

void check_vocabulary(const Corpus& corpus, std::size_t vocab_size) {
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    for (const int id : corpus.sequences[s]) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
        const std::string where = s < corpus.names.size() ? corpus.names[s] : "sequence " + std::to_string(s);
        throw ConfigError("corpus " + where + " contains token " + std::to_string(id) + " outside vocab_size " +
                          std::to_string(vocab_size));
      }
    }
  }
}

Corpus make_motif_corpus(const MotifCorpusConfig& cfg) {
  if (cfg.vocab_size < 2 || cfg.motif_length == 0 || cfg.motif_pool == 0 || cfg.length == 0) {
    throw ConfigError("motif corpus: vocab_size >= 2 and positive motif_length, motif_pool, length required");
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> token(0, static_cast<int>(cfg.vocab_size) - 1);
  std::vector<std::vector<int>> pool(cfg.motif_pool, std::vector<int>(cfg.motif_length));
  for (auto& motif : pool)
    for (auto& t : motif) t = token(rng);
  std::uniform_int_distribution<std::size_t> pick(0, cfg.motif_pool - 1);
  std::uniform_int_distribution<std::size_t> phase(0, cfg.motif_length - 1);
  const int v = static_cast<int>(cfg.vocab_size);
  Corpus corpus;
  for (std::size_t s = 0; s < cfg.sequences; ++s) {
    const auto& motif = pool[pick(rng)];
    const int shift = token(rng);
    const std::size_t start = phase(rng);
    std::vector<int> seq(cfg.length);
    for (std::size_t i = 0; i < cfg.length; ++i) seq[i] = (motif[(start + i) % cfg.motif_length] + shift) % v;
    corpus.sequences.push_back(std::move(seq));
    char name[32];
    std::snprintf(name, sizeof(name), "motif_%05zu.tok", s);
    corpus.names.emplace_back(name);
  }
  return corpus;
}

std::vector<int> random_crop(const std::vector<int>& seq, std::size_t length, std::mt19937_64& rng) {
  if (seq.size() <= length) return seq;
  std::uniform_int_distribution<std::size_t> start(0, seq.size() - length);
  const auto s = start(rng);
  return {seq.begin() + static_cast<std::ptrdiff_t>(s), seq.begin() + static_cast<std::ptrdiff_t>(s + length)};
}

std::vector<std::vector<int>> tile_crops(const Corpus& corpus, std::size_t length, std::size_t max_crops) {
  std::vector<std::vector<int>> out;
  for (const auto& seq : corpus.sequences) {
    for (std::size_t s = 0; s + 2 <= seq.size(); s += length) {
      const std::size_t e = std::min(seq.size(), s + length);
      out.emplace_back(seq.begin() + static_cast<std::ptrdiff_t>(s), seq.begin() + static_cast<std::ptrdiff_t>(e));
      if (max_crops && out.size() == max_crops) return out;
    }
  }
  return out;
}

}  // namespace relmusic::model
