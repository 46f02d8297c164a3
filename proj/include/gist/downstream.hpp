#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gist/image.hpp"

namespace gist::downstream {

enum class Regime { Base, GanTrain, GanTest };

inline constexpr std::array<Regime, 3> kAllRegimes{Regime::Base, Regime::GanTrain, Regime::GanTest};

std::string to_string(Regime r);  // base, gan_train, gan_test
Regime regime_from_string(const std::string& s);

enum class ClassifierKind {
  Logistic,  // softmax regression on desk features
  ConvNet,   // two strided conv layers + linear head
  Constant,  // always predicts constant_class
};

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::Logistic;
  std::string name = "logreg-desk";
  int epochs = 0;  // 0 picks the per-kind default
  double learning_rate = 0.0;
  double l2 = 1e-4;
  int batch_size = 32;
  int constant_class = 0;
};

ClassifierSpec logistic_spec();
ClassifierSpec convnet_spec();
ClassifierSpec constant_spec(int cls);

struct Metrics {
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct ClassifierReport {
  Regime regime = Regime::Base;
  std::string classifier_name;
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
  Eigen::MatrixXi confusion;  // rows actual, columns predicted
  int n_train = 0;
  int n_eval = 0;
};

// Macro-averaged over classes; a class with no predicted (or no actual)
// samples contributes 0 to precision (recall), and 0 to F1 when both are 0.
Metrics classification_metrics(const Eigen::MatrixXi& confusion);

// Trains on `train` and returns predicted labels for `eval`. n_classes is the
// shared vocabulary size.
std::vector<int> fit_predict(const std::vector<ImageRecord>& train, const std::vector<ImageRecord>& eval,
                             int n_classes, const ClassifierSpec& spec, std::uint64_t seed);

// synth_set may be null for the base regime and is never read then.
ClassifierReport run_regime(const std::vector<ImageRecord>& real_train, const std::vector<ImageRecord>& real_eval,
                            const std::vector<ImageRecord>* synth_set, Regime regime, const ClassifierSpec& spec,
                            std::uint64_t seed);

// specs x {base, gan_train, gan_test}, spec-major; regime i uses seed + i.
std::vector<ClassifierReport> run_protocol(const std::vector<ImageRecord>& real_train,
                                           const std::vector<ImageRecord>& real_eval,
                                           const std::vector<ImageRecord>* synth_set,
                                           const std::vector<ClassifierSpec>& specs, std::uint64_t seed,
                                           const std::vector<Regime>& regimes = {kAllRegimes.begin(), kAllRegimes.end()});

// classifier,regime,accuracy,precision,recall,f1 as percentages with 2 decimals.
std::string protocol_csv(const std::vector<ClassifierReport>& reports);
void write_protocol_csv(const std::vector<ClassifierReport>& reports, const std::filesystem::path& path);

}  // namespace gist::downstream
