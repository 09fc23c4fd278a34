// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "melvq/error.hpp"
#include "melvq/metrics.hpp"
#include "speech_synth.hpp"

using namespace melvq;

namespace {

AudioBuffer scaled(const AudioBuffer& a, double g) {
  AudioBuffer out = a;
  for (double& v : out.samples) v *= g;
  return out;
}

AudioBuffer add(const AudioBuffer& a, const AudioBuffer& b, double gb) {
  AudioBuffer out = a;
  for (std::size_t n = 0; n < out.size(); ++n) out.samples[n] += gb * b.samples[n];
  return out;
}

double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / double(x.size()));
}

}  // namespace

TEST_CASE("resampling to 10 kHz") {
  const std::size_t n = 16000;
  SUBCASE("in-band tone keeps its waveform") {
    const AudioBuffer x = testing::tone(1000.0, 0.5, n);
    const std::vector<double> y = resample(x.samples, 5, 8);
    CHECK(y.size() == 10000);
    double worst = 0.0;
    for (std::size_t j = 200; j + 200 < y.size(); ++j)
      worst = std::max(worst, std::abs(y[j] - 0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 * double(j) / 10000.0)));
    CHECK(worst < 5e-3);
  }
  SUBCASE("tone above the new Nyquist is suppressed") {
    const std::vector<double> y = resample(testing::tone(6500.0, 0.5, n).samples, 5, 8);
    CHECK(rms(std::span(y).subspan(200, y.size() - 400)) < 0.5 / std::sqrt(2.0) * 0.03);
  }
  SUBCASE("identity ratio") {
    const AudioBuffer x = testing::white_noise(1, 1.0, 100);
    CHECK(resample(x.samples, 3, 3) == x.samples);
  }
}

TEST_CASE("STOI") {
  const AudioBuffer x = testing::synth_utterance(21, 3.0);
  SUBCASE("self comparison") { CHECK(std::abs(stoi(x, x) - 1.0) < 1e-6); }
  SUBCASE("amplitude scaling of the degraded signal") {
    CHECK(std::abs(stoi(x, scaled(x, 0.5)) - 1.0) < 1e-6);
    CHECK(std::abs(stoi(x, scaled(x, 3.0)) - 1.0) < 1e-6);
  }
  SUBCASE("independent noise") {
    // Continuous voicing: envelopes are uncorrelated with noise.
    const AudioBuffer c = testing::speech_like_chirp(3.0);
    CHECK(stoi(c, testing::white_noise(99, 0.1, c.size())) < 0.05);
    // Pauses survive the -15 dB clipping and correlate envelopes; stays well below a match.
    CHECK(stoi(x, testing::white_noise(99, 0.1, x.size())) < 0.5);
  }
  SUBCASE("decreases with added noise") {
    const AudioBuffer noise = testing::white_noise(5, rms(x.samples), x.size());
    const double hi = stoi(x, add(x, noise, 0.1));
    const double mid = stoi(x, add(x, noise, 1.0));
    const double lo = stoi(x, add(x, noise, 3.0));
    CHECK(hi > mid);
    CHECK(mid > lo);
    CHECK(hi <= 1.0);
  }
  SUBCASE("lengths are equalised by truncation") {
    AudioBuffer longer = x;
    longer.samples.resize(x.size() + 5000, 0.25);
    CHECK(std::abs(stoi(x, longer) - 1.0) < 1e-6);
  }
  SUBCASE("too short") {
    const AudioBuffer s = testing::synth_utterance(2, 0.2);
    try {
      stoi(s, s);
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kTooShort);
    }
  }
  SUBCASE("sample rate mismatch") {
    AudioBuffer other = x;
    other.sample_rate_hz = 8000;
    CHECK_THROWS_AS(stoi(x, other), Error);
  }
}

TEST_CASE("MCD") {
  const FrameConfig cfg;
  MfccMatrix a{Matrix::Random(20, 80), cfg};
  CHECK(mcd(a, a) == 0.0);

  MfccMatrix energy = a;
  energy.values.col(0).array() += 4.0;
  CHECK(mcd(a, energy) == 0.0);

  MfccMatrix one{Matrix::Zero(1, 80), cfg};
  MfccMatrix unit = one;
  unit.values(0, 17) = 0.6;
  unit.values(0, 42) = 0.8;
  CHECK(mcd(one, unit) == doctest::Approx(6.1421).epsilon(1e-4));
  CHECK(mcd(one, unit) == doctest::Approx(10.0 / std::numbers::ln10 * std::numbers::sqrt2).epsilon(1e-14));

  MfccMatrix b{Matrix::Random(25, 80), cfg};
  CHECK(mcd(a, b) == mcd(b, a));
  CHECK(mcd(a, b) > 0.0);
  // Frame counts are equalised by truncation.
  MfccMatrix b20{b.values.topRows(20), cfg};
  CHECK(mcd(a, b) == mcd(a, b20));

  CHECK_THROWS_AS(mcd(a, MfccMatrix{Matrix::Zero(20, 40), cfg}), Error);
}

TEST_CASE("LSD") {
  const FrameConfig cfg;
  SUBCASE("identical and constant ratio") {
    MagnitudeSpectrogram r{Matrix::Random(4, 513).cwiseAbs(), cfg};
    CHECK(lsd(r, r) == 0.0);
    MagnitudeSpectrogram ten{r.values * 10.0, cfg};
    CHECK(lsd(r, ten) == doctest::Approx(20.0).epsilon(1e-6));
    CHECK(lsd(ten, r) == lsd(r, ten));
  }
  SUBCASE("hand-computed 2x3 example") {
    MagnitudeSpectrogram r{Matrix(2, 3), cfg}, d{Matrix(2, 3), cfg};
    r.values << 1, 10, 100, 1, 1, 1;
    d.values << 10, 10, 10, 1, 0.1, 1;
    // Frame 1: -20, 0, +20 dB -> sqrt(800/3); frame 2: 0, 20, 0 dB -> sqrt(400/3).
    const double expect = (16.329931618554521 + 11.547005383792516) / 2.0;
    CHECK(lsd(r, d) == doctest::Approx(expect).epsilon(1e-7));
  }
  SUBCASE("shape mismatch") {
    MagnitudeSpectrogram r{Matrix::Ones(2, 3), cfg}, d{Matrix::Ones(2, 4), cfg};
    CHECK_THROWS_AS(lsd(r, d), Error);
  }
}

TEST_CASE("segmental SNR") {
  const AudioBuffer x = testing::synth_utterance(4, 1.0);
  CHECK(seg_snr(x, x) == kSegSnrMax);
  CHECK(seg_snr(x, scaled(x, 0.0)) == doctest::Approx(0.0));
  CHECK(seg_snr(x, scaled(x, -1.0)) == doctest::Approx(-20.0 * std::log10(2.0)));
  CHECK(seg_snr(x, scaled(x, -1e4)) == kSegSnrMin);

  SUBCASE("noise constructed to a known per-segment SNR") {
    const AudioBuffer tone = testing::tone(300.0, 0.4, 256 * 40);
    const AudioBuffer noise = testing::white_noise(6, 1.0, tone.size());
    const double target_db = 12.0;
    AudioBuffer deg = tone;
    for (std::size_t s = 0; s < 40; ++s) {
      double ps = 0.0, pn = 0.0;
      for (std::size_t i = s * 256; i < (s + 1) * 256; ++i) {
        ps += tone.samples[i] * tone.samples[i];
        pn += noise.samples[i] * noise.samples[i];
      }
      const double g = std::sqrt(ps / pn * std::pow(10.0, -target_db / 10.0));
      for (std::size_t i = s * 256; i < (s + 1) * 256; ++i) deg.samples[i] += g * noise.samples[i];
    }
    CHECK(std::abs(seg_snr(tone, deg) - target_db) < 0.1);
  }
  SUBCASE("silent segments are skipped") {
    AudioBuffer padded = testing::tone(300.0, 0.4, 256 * 10);
    padded.samples.resize(256 * 30, 0.0);
    AudioBuffer deg = padded;
    for (std::size_t i = 256 * 10; i < deg.size(); ++i) deg.samples[i] = 0.3;
    CHECK(seg_snr(padded, deg) == kSegSnrMax);
  }
  SUBCASE("silent reference") {
    const AudioBuffer silence{std::vector<double>(4096, 0.0), 16000};
    CHECK_THROWS_AS(seg_snr(silence, x), Error);
  }
}

TEST_CASE("reports") {
  const AudioBuffer x = testing::synth_utterance(8, 2.0);
  const QualityReport same = evaluate_pair(x, x, "same");
  REQUIRE(same.stoi);
  CHECK(*same.stoi == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(same.mcd_db == 0.0);
  CHECK(same.lsd_db == 0.0);
  CHECK(same.seg_snr_db == kSegSnrMax);

  const AudioBuffer shorty = testing::synth_utterance(9, 0.2);
  const QualityReport no_stoi = evaluate_pair(shorty, scaled(shorty, 0.9), "short");
  CHECK(!no_stoi.stoi);
  // Exactly-zero padding bins contribute 0 dB.
  CHECK(no_stoi.lsd_db <= -20.0 * std::log10(0.9));
  CHECK(no_stoi.lsd_db > 0.99 * -20.0 * std::log10(0.9));

  const std::vector<QualityReport> all{same, no_stoi};
  const QualityReport mean = corpus_mean(all);
  CHECK(*mean.stoi == *same.stoi);
  CHECK(mean.lsd_db == doctest::Approx(no_stoi.lsd_db / 2.0));

  const auto line = nlohmann::json::parse(format_report_line(no_stoi));
  CHECK(line["id"] == "short");
  CHECK(line["stoi"].is_null());
  CHECK(line["lsd_db"].get<double>() == no_stoi.lsd_db);
  const std::string text = format_report_line(same);
  CHECK(text.find("\n") == std::string::npos);
  CHECK(text.rfind("{\"id\":\"same\",\"stoi\":", 0) == 0);

  const auto footer = nlohmann::json::parse(format_mean_footer(all));
  CHECK(footer["mean"] == true);
  CHECK(footer["count"] == 2);
  CHECK(footer["seg_snr_db"].get<double>() == mean.seg_snr_db);
}
