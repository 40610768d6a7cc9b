// Copyright 2026 The asrbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "asrbench/ctc/ctc.hpp"
#include "asrbench/data/records.hpp"
#include "asrbench/features/features.hpp"

namespace asrbench::data {

struct SynthConfig {
  int utterance_count = 10;
  std::uint64_t seed = 1;
  int min_words = 1;
  int max_words = 8;
  double char_ms = 120;
  double word_gap_ms = 40;
  double margin_ms = 60;
  double ramp_ms = 10;  // raised-cosine fade at each end of a character
  double amplitude = 0.5;
  double snr_db = std::numeric_limits<double>::infinity();
};

struct SynthUtterance {
  features::AudioClip clip;
  std::string transcript;
};

/// Twenty short words, several with doubled letters.
std::vector<std::string> default_vocabulary();

/// Tone used for a word symbol: the centre frequency of FFT bin
/// 8 + 8 * alphabet_index at 512 points and 16 kHz.
double tone_frequency(char symbol, const ctc::Alphabet& alphabet = ctc::Alphabet::standard());
int tone_bin(char symbol, const ctc::Alphabet& alphabet = ctc::Alphabet::standard());

std::vector<SynthUtterance> synth_corpus(std::span<const std::string> vocab, const SynthConfig& cfg,
                                         const ctc::Alphabet& alphabet = ctc::Alphabet::standard());

/// One word per line; blank lines ignored.
std::vector<std::string> read_vocabulary(const std::filesystem::path& path);

/// utt-NNNNN.wav + utt-NNNNN.txt per utterance and a corpus.json listing.
void write_corpus(const std::filesystem::path& dir, std::span<const SynthUtterance> corpus);

struct CorpusEntry {
  std::filesystem::path wav;
  std::string transcript;
};

/// Every *.wav with a sibling .txt, sorted by name.
std::vector<CorpusEntry> list_corpus(const std::filesystem::path& dir);

struct ExtractReport {
  std::vector<std::filesystem::path> shards;
  std::vector<std::pair<std::filesystem::path, std::string>> skipped;  // file, reason
  std::int64_t elements = 0;
  std::int64_t filtered_long = 0;
};

/// Features for every readable clip at most 16700 ms long, standardised
/// with statistics fitted on the whole set, written as record shards plus
/// manifest.json. A skip.txt report lists unreadable inputs.
ExtractReport extract_corpus(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                             const features::FeConfig& cfg = {});

/// In-memory equivalent used by tests and benchmarks: standardised features
/// for the given clips (ids in order).
std::vector<Utterance> featurize(std::span<const SynthUtterance> corpus, features::Standardization* fitted = nullptr,
                                 const features::FeConfig& cfg = {});

}  // namespace asrbench::data
