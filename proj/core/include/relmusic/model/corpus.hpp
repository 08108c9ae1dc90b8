// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace relmusic::model {

struct Corpus {
  std::vector<std::vector<int>> sequences;
  std::vector<std::string> names;

  std::size_t size() const { return sequences.size(); }
  std::size_t total_tokens() const;
};

/// Reads every *.tok file of a directory in name order.
Corpus load_corpus_dir(const std::string& dir);
void save_corpus_dir(const Corpus& corpus, const std::string& dir);

/// Throws ConfigError if any id is outside the vocabulary.
void check_vocabulary(const Corpus& corpus, std::size_t vocab_size);

/// Synthetic corpus of repeating motifs. A pool of random motifs is drawn
/// once; each sequence picks a motif, transposes it by a random offset
/// (mod vocab) and repeats it, starting at a random phase.
struct MotifCorpusConfig {
  std::size_t vocab_size = 64;
  std::size_t sequences = 64;
  std::size_t length = 512;
  std::size_t motif_length = 12;
  std::size_t motif_pool = 16;
  std::uint64_t seed = 1;
};

Corpus make_motif_corpus(const MotifCorpusConfig& cfg);

/// Random crop of `length` tokens (whole sequence when shorter).
std::vector<int> random_crop(const std::vector<int>& seq, std::size_t length, std::mt19937_64& rng);

/// Consecutive non-overlapping crops of `length` tokens from each sequence,
/// in order, at most `max_crops` in total (0 = all). Tails shorter than two
/// tokens are dropped.
std::vector<std::vector<int>> tile_crops(const Corpus& corpus, std::size_t length, std::size_t max_crops = 0);

}  // namespace relmusic::model
