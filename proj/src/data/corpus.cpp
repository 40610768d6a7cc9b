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

#include "asrbench/data/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include "asrbench/error.hpp"
#include "json.hpp"

namespace asrbench::data {

namespace {

constexpr double kBinHz = static_cast<double>(features::kSampleRate) / 512.0;

std::size_t ms_to_samples(double ms) {
  return static_cast<std::size_t>(std::llround(ms * features::kSampleRate / 1000.0));
}

std::string utterance_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "utt-%05zu", i);
  return buf;
}

void check_word(const std::string& w, const ctc::Alphabet& alphabet) {
  if (w.empty()) throw InvalidArgument("vocabulary contains an empty word");
  for (char c : w)
    if (const auto idx = alphabet.index_of(c); !idx || !alphabet.is_word_symbol(*idx)) throw InvalidArgument("vocabulary word '" + w + "' has a symbol outside the alphabet");
}

}  // namespace

std::vector<std::string> default_vocabulary() {
  return {"the", "cat", "sat", "on",  "mat", "dog", "ran",  "far", "cool", "book",
          "see", "tree", "red", "sun", "big", "hill", "fox", "jump", "sky", "blue"};
}

int tone_bin(char symbol, const ctc::Alphabet& alphabet) {
  const auto idx = alphabet.index_of(symbol);
  if (!idx || !alphabet.is_word_symbol(*idx))
    throw InvalidArgument(std::string("no tone for symbol '") + symbol + "'");
  return 8 + 8 * *idx;
}

double tone_frequency(char symbol, const ctc::Alphabet& alphabet) { return tone_bin(symbol, alphabet) * kBinHz; }

std::vector<SynthUtterance> synth_corpus(std::span<const std::string> vocab, const SynthConfig& cfg,
                                         const ctc::Alphabet& alphabet) {
  if (vocab.empty()) throw InvalidArgument("synthetic corpus needs a non-empty vocabulary");
  if (cfg.utterance_count < 0) throw InvalidArgument("utterance count must be >= 0");
  if (cfg.min_words < 1 || cfg.max_words < cfg.min_words) throw InvalidArgument("need 1 <= min_words <= max_words");
  for (const auto& w : vocab) check_word(w, alphabet);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> word_count(cfg.min_words, cfg.max_words);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  const std::size_t char_len = ms_to_samples(cfg.char_ms);
  const std::size_t ramp = std::min(ms_to_samples(cfg.ramp_ms), char_len / 2);
  const std::size_t gap = ms_to_samples(cfg.word_gap_ms);
  const std::size_t margin = ms_to_samples(cfg.margin_ms);

  std::vector<SynthUtterance> out;
  out.reserve(static_cast<std::size_t>(cfg.utterance_count));
  for (int u = 0; u < cfg.utterance_count; ++u) {
    SynthUtterance s;
    const int n = word_count(rng);
    std::vector<std::string> words;
    for (int i = 0; i < n; ++i) words.push_back(vocab[pick(rng)]);

    auto& pcm = s.clip.samples;
    pcm.assign(margin, 0.0f);
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (w > 0) {
        pcm.insert(pcm.end(), gap, 0.0f);
        s.transcript += ' ';
      }
      s.transcript += words[w];
      for (char c : words[w]) {
        const double f = tone_frequency(c, alphabet);
        for (std::size_t k = 0; k < char_len; ++k) {
          double env = 1.0;
          const std::size_t edge = std::min(k, char_len - 1 - k);
          if (edge < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * (static_cast<double>(edge) + 0.5) / ramp);
          const double t = static_cast<double>(k) / features::kSampleRate;
          pcm.push_back(static_cast<float>(cfg.amplitude * env * std::sin(2 * std::numbers::pi * f * t)));
        }
      }
    }
    pcm.insert(pcm.end(), margin, 0.0f);

    if (std::isfinite(cfg.snr_db)) {
      double power = 0;
      for (float v : pcm) power += static_cast<double>(v) * v;
      power /= static_cast<double>(pcm.size());
      std::normal_distribution<double> noise(0.0, std::sqrt(power / std::pow(10.0, cfg.snr_db / 10.0)));
      for (float& v : pcm) v = static_cast<float>(std::clamp(v + noise(rng), -1.0, 1.0));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::vector<std::string> words;
  for (std::string line; std::getline(in, line);) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    words.push_back(line.substr(b, e - b + 1));
  }
  if (words.empty()) throw InvalidArgument("vocabulary " + path.string() + " is empty");
  for (const auto& w : words) check_word(w, ctc::Alphabet::standard());
  return words;
}

void write_corpus(const std::filesystem::path& dir, std::span<const SynthUtterance> corpus) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json listing = nlohmann::json::array();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto stem = utterance_stem(i);
    features::write_wav(dir / (stem + ".wav"), corpus[i].clip);
    std::ofstream txt(dir / (stem + ".txt"), std::ios::trunc);
    txt << corpus[i].transcript << '\n';
    if (!txt) throw IoError("cannot write transcript " + stem);
    listing.push_back({{"audio", stem + ".wav"}, {"transcript", corpus[i].transcript},
                       {"duration_ms", corpus[i].clip.duration_ms()}});
  }
  std::ofstream out(dir / "corpus.json", std::ios::trunc);
  out << nlohmann::json{{"count", corpus.size()}, {"utterances", listing}}.dump(2) << '\n';
  if (!out) throw IoError("cannot write corpus.json in " + dir.string());
}

std::vector<CorpusEntry> list_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("no such corpus directory: " + dir.string());
  std::vector<CorpusEntry> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".wav") continue;
    auto txt = entry.path();
    txt.replace_extension(".txt");
    std::ifstream in(txt);
    if (!in) continue;
    std::string line;
    std::getline(in, line);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    out.push_back({entry.path(), line});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.wav < b.wav; });
  return out;
}

std::vector<Utterance> featurize(std::span<const SynthUtterance> corpus, features::Standardization* fitted,
                                 const features::FeConfig& cfg) {
  const features::FeatureExtractor fe(cfg);
  std::vector<Utterance> out;
  std::vector<nn::Matrix> raw;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Utterance u;
    u.id = static_cast<std::int64_t>(i);
    u.features = fe.extract(corpus[i].clip).frames;
    u.transcript = corpus[i].transcript;
    u.duration_ms = corpus[i].clip.duration_ms();
    raw.push_back(u.features);
    out.push_back(std::move(u));
  }
  const auto norm = raw.empty() ? features::Standardization::identity(cfg.feature_dim())
                                : features::Standardization::fit(raw);
  for (auto& u : out) u.features = norm.apply(u.features);
  if (fitted) *fitted = norm;
  return out;
}

ExtractReport extract_corpus(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                             const features::FeConfig& cfg) {
  const auto entries = list_corpus(in_dir);
  const features::FeatureExtractor fe(cfg);
  ExtractReport report;
  std::vector<Utterance> kept;
  std::vector<nn::Matrix> raw;
  for (const auto& e : entries) {
    try {
      const auto clip = features::read_wav(e.wav);
      if (!within_duration_limit(clip.duration_ms())) {
        ++report.filtered_long;
        continue;
      }
      ctc::encode_label(e.transcript);
      Utterance u;
      u.features = fe.extract(clip).frames;
      u.transcript = e.transcript;
      u.duration_ms = clip.duration_ms();
      raw.push_back(u.features);
      kept.push_back(std::move(u));
    } catch (const Error& err) {
      report.skipped.emplace_back(e.wav, err.what());
    }
  }
  if (kept.empty()) throw DataError("no usable utterances in " + in_dir.string());

  const auto norm = features::Standardization::fit(raw);
  Manifest manifest;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    kept[i].id = static_cast<std::int64_t>(i);
    kept[i].features = norm.apply(kept[i].features);
    manifest.total_duration_ms += kept[i].duration_ms;
  }
  report.shards = write_records(kept, out_dir);
  report.elements = static_cast<std::int64_t>(kept.size());
  manifest.element_count = report.elements;
  manifest.feature_dim = cfg.feature_dim();
  for (const auto& p : report.shards) manifest.shards.push_back(p.filename().string());
  manifest.standardization = norm;
  write_manifest(out_dir, manifest);

  std::ofstream skip(out_dir / "skip.txt", std::ios::trunc);
  for (const auto& [file, reason] : report.skipped) skip << file.filename().string() << '\t' << reason << '\n';
  return report;
}

}  // namespace asrbench::data
