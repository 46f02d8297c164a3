#include "gist/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "gist/error.hpp"
#include "gist/fid.hpp"
#include "gist/image_io.hpp"
#include "gist/nn/layers.hpp"

namespace gist::downstream {

namespace {

constexpr int kConvInput = 32;

std::set<int> vocabulary(const std::vector<ImageRecord>& records, const char* what) {
  std::set<int> out;
  for (const auto& r : records) {
    if (!r.label) throw Error(Errc::LabelVocabularyMismatch, std::string(what) + " contains unlabeled images");
    out.insert(*r.label);
  }
  return out;
}

std::vector<int> predict_logistic(const std::vector<ImageRecord>& train, const std::vector<ImageRecord>& eval, int k,
                                  const ClassifierSpec& spec) {
  const auto extractor = fid::desk_extractor();
  Eigen::MatrixXd x = fid::extract_features(fid::images_of(train), extractor);
  Eigen::MatrixXd xe = fid::extract_features(fid::images_of(eval), extractor);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::RowVectorXd scale = ((x.rowwise() - mean).array().square().colwise().mean()).sqrt();
  for (Eigen::Index j = 0; j < scale.size(); ++j)
    if (scale(j) < 1e-8) scale(j) = 1.0;
  x = (x.rowwise() - mean).array().rowwise() / scale.array();
  xe = (xe.rowwise() - mean).array().rowwise() / scale.array();

  const auto n = x.rows();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) y(i, *train[static_cast<std::size_t>(i)].label) = 1.0;

  // Full-batch gradient descent on mean cross-entropy + l2/2 ||W||^2.
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(x.cols(), k);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(k);
  const int epochs = spec.epochs > 0 ? spec.epochs : 400;
  const double lr = spec.learning_rate > 0 ? spec.learning_rate : 0.5;
  for (int e = 0; e < epochs; ++e) {
    Eigen::MatrixXd logits = (x * w).rowwise() + b;
    logits = logits.colwise() - logits.rowwise().maxCoeff();
    Eigen::MatrixXd p = logits.array().exp();
    p = p.array().colwise() / p.rowwise().sum().array();
    const Eigen::MatrixXd d = (p - y) / static_cast<double>(n);
    w -= lr * (x.transpose() * d + spec.l2 * w);
    b -= lr * d.colwise().sum();
  }
  const Eigen::MatrixXd scores = (xe * w).rowwise() + b;
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) scores.row(i).maxCoeff(&out[static_cast<std::size_t>(i)]);
  return out;
}

class ConvClassifier {
 public:
  ConvClassifier(int k, std::uint64_t seed)
      : c1_("cls.conv1", 1, 8, 4, 2, 1), c2_("cls.conv2", 8, 16, 4, 2, 1), fc_("cls.fc", 16 * 8 * 8, k) {
    std::mt19937_64 rng(seed);
    c1_.init(rng, nn::leaky_gain());
    c2_.init(rng, nn::leaky_gain());
    fc_.init(rng, 1.0);
  }

  nn::Mat<float> forward(const nn::FeatureMap<float>& x) {
    auto h = c1_.forward(x);
    nn::leaky_relu_forward(h.data, s1_);
    h = c2_.forward(h);
    nn::leaky_relu_forward(h.data, s2_);
    shape_ = h;
    return fc_.forward(nn::Mat<float>(h.flat()));
  }

  void backward(const nn::Mat<float>& dlogits) {
    nn::FeatureMap<float> d(shape_.channels, shape_.batch, shape_.height, shape_.width);
    d.flat() = fc_.backward(dlogits);
    d.data.array() *= s2_.array();
    d = c2_.backward(d);
    d.data.array() *= s1_.array();
    c1_.backward(d);
  }

  std::vector<nn::Param<float>*> params() {
    std::vector<nn::Param<float>*> out;
    for (auto* p : c1_.params()) out.push_back(p);
    for (auto* p : c2_.params()) out.push_back(p);
    for (auto* p : fc_.params()) out.push_back(p);
    return out;
  }

 private:
  nn::Conv2d<float> c1_, c2_;
  nn::Linear<float> fc_;
  nn::Mat<float> s1_, s2_;
  nn::FeatureMap<float> shape_;
};

std::vector<Image> conv_inputs(const std::vector<ImageRecord>& records) {
  std::vector<Image> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.image.square()) throw Error(Errc::NotSquare, "classifier input must be square");
    out.push_back(r.image.height == kConvInput ? r.image : resize_bilinear(r.image, kConvInput, kConvInput));
  }
  return out;
}

nn::FeatureMap<float> pack(const std::vector<Image>& images, const std::vector<std::size_t>& idx, std::size_t from,
                           std::size_t to) {
  nn::FeatureMap<float> x(1, static_cast<int>(to - from), kConvInput, kConvInput);
  float* dst = x.data.data();
  for (std::size_t i = from; i < to; ++i)
    for (float p : images[idx[i]].pixels) *dst++ = 2.0f * p - 1.0f;
  return x;
}

std::vector<int> predict_convnet(const std::vector<ImageRecord>& train, const std::vector<ImageRecord>& eval, int k,
                                 const ClassifierSpec& spec, std::uint64_t seed) {
  const auto xs = conv_inputs(train);
  const auto xe = conv_inputs(eval);
  ConvClassifier net(k, seed);
  nn::Adam<float> opt(spec.learning_rate > 0 ? spec.learning_rate : 1e-3, 0.9, 0.999);
  std::mt19937_64 rng(seed ^ 0xC1A55ull);
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  const int epochs = spec.epochs > 0 ? spec.epochs : 12;
  const auto bs = static_cast<std::size_t>(std::max(1, spec.batch_size));
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < order.size(); s += bs) {
      const std::size_t t = std::min(order.size(), s + bs);
      const auto x = pack(xs, order, s, t);
      nn::Mat<float> logits = net.forward(x);
      // softmax cross-entropy gradient
      for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        auto col = logits.col(j);
        col.array() -= col.maxCoeff();
        col = col.array().exp().matrix();
        col /= col.sum();
        col(*train[order[s + static_cast<std::size_t>(j)]].label) -= 1.0f;
      }
      logits /= static_cast<float>(t - s);
      for (auto* p : net.params()) p->zero_grad();
      net.backward(logits);
      for (auto* p : net.params())
        if (p->name.ends_with(".weight")) p->grad += static_cast<float>(spec.l2) * p->value;
      opt.step(net.params());
    }
  }
  std::vector<std::size_t> all(xe.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> out;
  for (std::size_t s = 0; s < all.size(); s += 256) {
    const std::size_t t = std::min(all.size(), s + 256);
    const nn::Mat<float> logits = net.forward(pack(xe, all, s, t));
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      int best = 0;
      logits.col(j).maxCoeff(&best);
      out.push_back(best);
    }
  }
  return out;
}

}  // namespace

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Base: return "base";
    case Regime::GanTrain: return "gan_train";
    case Regime::GanTest: return "gan_test";
  }
  return "?";
}

Regime regime_from_string(const std::string& s) {
  for (Regime r : kAllRegimes)
    if (to_string(r) == s) return r;
  throw Error(Errc::InvalidArgument, "unknown regime '" + s + "'");
}

ClassifierSpec logistic_spec() { return {}; }

ClassifierSpec convnet_spec() {
  ClassifierSpec s;
  s.kind = ClassifierKind::ConvNet;
  s.name = "convnet2";
  return s;
}

ClassifierSpec constant_spec(int cls) {
  ClassifierSpec s;
  s.kind = ClassifierKind::Constant;
  s.name = "constant-" + std::to_string(cls);
  s.constant_class = cls;
  return s;
}

Metrics classification_metrics(const Eigen::MatrixXi& confusion) {
  if (confusion.rows() != confusion.cols()) throw Error(Errc::ShapeMismatch, "confusion matrix must be square");
  if (confusion.rows() < 2) throw Error(Errc::InvalidArgument, "need at least two classes");
  const long long total = confusion.cast<long long>().sum();
  if (total < 1) throw Error(Errc::EmptyConfusion, "confusion matrix is empty");
  const auto k = confusion.rows();
  Metrics m;
  m.accuracy = static_cast<double>(confusion.trace()) / static_cast<double>(total);
  for (Eigen::Index c = 0; c < k; ++c) {
    const double tp = confusion(c, c);
    const double predicted = confusion.col(c).sum();
    const double actual = confusion.row(c).sum();
    const double p = predicted > 0 ? tp / predicted : 0.0;
    const double r = actual > 0 ? tp / actual : 0.0;
    m.precision += p;
    m.recall += r;
    m.f1 += p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  m.precision /= static_cast<double>(k);
  m.recall /= static_cast<double>(k);
  m.f1 /= static_cast<double>(k);
  return m;
}

std::vector<int> fit_predict(const std::vector<ImageRecord>& train, const std::vector<ImageRecord>& eval,
                             int n_classes, const ClassifierSpec& spec, std::uint64_t seed) {
  if (train.empty() || eval.empty()) throw Error(Errc::EmptyDataset, "classifier needs training and evaluation images");
  switch (spec.kind) {
    case ClassifierKind::Logistic: return predict_logistic(train, eval, n_classes, spec);
    case ClassifierKind::ConvNet: return predict_convnet(train, eval, n_classes, spec, seed);
    case ClassifierKind::Constant:
      if (spec.constant_class < 0 || spec.constant_class >= n_classes)
        throw Error(Errc::ClassOutOfRange, "constant class outside vocabulary");
      return std::vector<int>(eval.size(), spec.constant_class);
  }
  throw Error(Errc::InvalidArgument, "unknown classifier kind");
}

ClassifierReport run_regime(const std::vector<ImageRecord>& real_train, const std::vector<ImageRecord>& real_eval,
                            const std::vector<ImageRecord>* synth_set, Regime regime, const ClassifierSpec& spec,
                            std::uint64_t seed) {
  if (regime != Regime::Base && (synth_set == nullptr || synth_set->empty()))
    throw Error(Errc::MissingSyntheticSet, to_string(regime) + " needs a synthetic set");
  const auto vocab = vocabulary(real_train, "real_train");
  if (vocabulary(real_eval, "real_eval") != vocab)
    throw Error(Errc::LabelVocabularyMismatch, "real_eval classes differ from real_train");
  if (regime != Regime::Base && vocabulary(*synth_set, "synth_set") != vocab)
    throw Error(Errc::LabelVocabularyMismatch, "synthetic classes differ from real_train");
  const int k = vocab.empty() ? 0 : *vocab.rbegin() + 1;

  const auto& train = regime == Regime::GanTrain ? *synth_set : real_train;
  const auto& eval = regime == Regime::GanTest ? *synth_set : real_eval;
  const auto predicted = fit_predict(train, eval, k, spec, seed);

  ClassifierReport rep;
  rep.regime = regime;
  rep.classifier_name = spec.name;
  rep.confusion = Eigen::MatrixXi::Zero(k, k);
  for (std::size_t i = 0; i < eval.size(); ++i) rep.confusion(*eval[i].label, predicted[i]) += 1;
  const Metrics m = classification_metrics(rep.confusion);
  rep.accuracy = m.accuracy;
  rep.precision = m.precision;
  rep.recall = m.recall;
  rep.f1 = m.f1;
  rep.n_train = static_cast<int>(train.size());
  rep.n_eval = static_cast<int>(eval.size());
  return rep;
}

std::vector<ClassifierReport> run_protocol(const std::vector<ImageRecord>& real_train,
                                           const std::vector<ImageRecord>& real_eval,
                                           const std::vector<ImageRecord>* synth_set,
                                           const std::vector<ClassifierSpec>& specs, std::uint64_t seed,
                                           const std::vector<Regime>& regimes) {
  std::vector<ClassifierReport> out;
  for (const auto& spec : specs)
    for (Regime r : regimes)
      out.push_back(run_regime(real_train, real_eval, synth_set, r, spec, seed + static_cast<std::uint64_t>(r)));
  return out;
}

std::string protocol_csv(const std::vector<ClassifierReport>& reports) {
  std::string out = "classifier,regime,accuracy,precision,recall,f1\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.2f,%.2f,%.2f,%.2f\n", r.classifier_name.c_str(), to_string(r.regime).c_str(),
                  100.0 * r.accuracy, 100.0 * r.precision, 100.0 * r.recall, 100.0 * r.f1);
    out += buf;
  }
  return out;
}

void write_protocol_csv(const std::vector<ClassifierReport>& reports, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  io::write_text_atomic(path, protocol_csv(reports));
}

}  // namespace gist::downstream
