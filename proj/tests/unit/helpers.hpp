#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>

#include "contesta/cohort.hpp"
#include "contesta/error.hpp"
#include "contesta/models.hpp"

namespace testing {

// Checks that `expr` throws contesta::Error carrying `code`.
#define CHECK_ERROR_CODE(expr, expected_code)                              \
  do {                                                                     \
    bool thrown_ = false;                                                  \
    try {                                                                  \
      (void)(expr);                                                        \
    } catch (const contesta::Error& e_) {                                  \
      thrown_ = true;                                                      \
      CHECK_MESSAGE(e_.code() == (expected_code), e_.what());              \
    }                                                                      \
    CHECK_MESSAGE(thrown_, "expected contesta::Error from " #expr);        \
  } while (0)

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline contesta::EpisodeRecord make_record(const std::string& id, contesta::Label label, double ga, double w,
                                           double pna, contesta::Gender gen = contesta::Gender::Female) {
  contesta::EpisodeRecord r;
  r.record_id = id;
  r.label = label;
  r.demographics.gen = gen;
  r.demographics.ga = ga;
  r.demographics.w = w;
  r.demographics.bw = 0.9 * w;
  r.demographics.pna = pna;
  return r;
}

// Scores with a fixed function of the named features; used to test
// explainers against known answers.
class FunctionModel final : public contesta::Classifier {
 public:
  using Fn = std::function<double(const std::vector<double>&)>;
  FunctionModel(std::vector<contesta::Feature> features, Fn fn) : features_(std::move(features)), fn_(std::move(fn)) {}
  const std::vector<contesta::Feature>& feature_names() const override { return features_; }
  double predict_proba(std::span<const double> x) const override {
    return fn_(std::vector<double>(x.begin(), x.end()));
  }
  using contesta::Classifier::predict_proba;

 private:
  std::vector<contesta::Feature> features_;
  Fn fn_;
};

}  // namespace testing
