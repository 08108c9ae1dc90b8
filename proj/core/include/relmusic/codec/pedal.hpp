// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "relmusic/codec/notes.hpp"

namespace relmusic::codec {

/// Sustain-pedal preprocessing. The pedal is down from a control value >= 64
/// until the next value < 64. A note released while the pedal is down is
/// lengthened to the earlier of the pedal release and the next onset of the
/// same pitch; a note released after the pedal comes up keeps its own offset.
/// Notes are never shortened. A pedal still down at the end of the event list
/// sustains until the last note offset.
std::vector<NoteEvent> apply_sustain_pedal(const std::vector<NoteEvent>& notes,
                                           const std::vector<PedalEvent>& pedals);

}  // namespace relmusic::codec
