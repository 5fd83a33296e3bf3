// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: acceptance [criterion numbers...]

#include "profpipe/evaluation.hpp"
#include "profpipe/fusion.hpp"
#include "profpipe/multitask.hpp"
#include "report_fixture.hpp"
#include "support.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

using namespace profpipe;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string pct(double a) { return fmt("%.1f%%", 100.0 * a); }

// --- shared experiment plumbing -------------------------------------------

struct Data {
  DatasetSpec spec;
  DatasetManifest train, val;
  ClipLoader loader;
};

Data make_data(const DatasetSpec& spec, std::uint64_t split_seed = 0) {
  auto split = split_dataset(plan_dataset(spec), 0.25, split_seed);
  return {spec, std::move(split.train), std::move(split.val), synthetic_loader(spec)};
}

EvalReport two_stage_report(const ClassifierBank& bank, const ScenarioRecognizer& rec, const Data& d) {
  return evaluate_records(predict_manifest(bank, rec, d.val, d.loader), {"ego", "exo", "combined"});
}

double combined_accuracy(const EvalReport& r) { return *r.column("combined").overall.accuracy(); }

// Central 95% interval of Binomial(n, p) counts.
std::pair<int, int> binomial_interval(int n, double p) {
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    pmf[static_cast<std::size_t>(k)] = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                                                k * std::log(p) + (n - k) * std::log1p(-p));
  }
  int lo = 0;
  double below = 0.0;
  while (below + pmf[static_cast<std::size_t>(lo)] <= 0.025) below += pmf[static_cast<std::size_t>(lo++)];
  int hi = n;
  double above = 0.0;
  while (above + pmf[static_cast<std::size_t>(hi)] <= 0.025) above += pmf[static_cast<std::size_t>(hi--)];
  return {lo, hi};
}

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// --- 1. exactness ----------------------------------------------------------

Outcome exactness() {
  Engine e(101);
  double worst_decomp = 0, worst_shift = 0, worst_combined = 0;
  for (const double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    for (int i = 0; i < 200; ++i) {
      const Eigen::VectorXd lp = test::random_matrix(4, 1, e, 4.0);
      const Eigen::VectorXd ls = test::random_matrix(6, 1, e, 4.0);
      const int yp = static_cast<int>(uniform_index(e, 4)), ys = static_cast<int>(uniform_index(e, 6));
      const auto parts = multitask_loss(lp, yp, ls, ys, alpha);
      worst_decomp = std::max(worst_decomp, std::abs(parts.total - (alpha * parts.l_prof + (1 - alpha) * parts.l_scen)));
    }
  }
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd x = test::random_matrix(1 + static_cast<Eigen::Index>(uniform_index(e, 8)), 1, e, 5.0);
    const double c = uniform(e, -50.0, 50.0);
    const Eigen::VectorXd shifted = (x.array() + c).matrix();
    worst_shift = std::max(worst_shift, (softmax<double>(x) - softmax<double>(shifted)).cwiseAbs().maxCoeff());

    ViewProbabilities p;
    for (const auto v : kAllViews) p[v] = test::random_simplex(4, e);
    const ProbVector ego = aggregate(p, Strategy::EgoOnly), exo = aggregate(p, Strategy::ExoAverage);
    worst_combined = std::max(
        worst_combined, (aggregate(p, Strategy::Combined) - (ego + 4.0 * exo) / 5.0).cwiseAbs().maxCoeff());
  }
  const double worst = std::max({worst_decomp, worst_shift, worst_combined});
  return {worst < 1e-12, "max deviation: decomposition " + fmt("%.1e", worst_decomp) + ", softmax shift " +
                             fmt("%.1e", worst_shift) + ", combined identity " + fmt("%.1e", worst_combined)};
}

// --- 2. gradients ----------------------------------------------------------

Outcome gradients() {
  Engine e(202);
  const double h = 1e-5;
  double worst_ce = 0, worst_head = 0;
  const auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); };
  for (int inst = 0; inst < 50; ++inst) {
    const int k = inst % 2 == 0 ? 4 : 6;
    Eigen::VectorXd z = test::random_matrix(k, 1, e, 3.0);
    const int y = static_cast<int>(uniform_index(e, static_cast<std::uint64_t>(k)));
    const Eigen::VectorXd g = cross_entropy_grad<double>(z, y);
    for (int i = 0; i < k; ++i) {
      const double saved = z(i);
      z(i) = saved + h;
      const double up = cross_entropy<double>(z, y);
      z(i) = saved - h;
      const double down = cross_entropy<double>(z, y);
      z(i) = saved;
      worst_ce = std::max(worst_ce, rel(g(i), (up - down) / (2 * h)));
    }
  }
  for (int inst = 0; inst < 50; ++inst) {
    const int k = inst % 2 == 0 ? 4 : 6;
    const int d = 2 + static_cast<int>(uniform_index(e, 7));
    const int n = 1 + static_cast<int>(uniform_index(e, 4));
    LinearHead<double> head("head", k, d, e);
    head.bias().value = test::random_matrix(k, 1, e, 0.5);
    Eigen::MatrixXd x = test::random_matrix(n, d, e, 2.0);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = static_cast<int>(uniform_index(e, static_cast<std::uint64_t>(k)));
    const auto loss = [&] {
      const Eigen::MatrixXd logits = head.forward(x);
      double total = 0;
      for (int i = 0; i < n; ++i) total += cross_entropy<double>(logits.row(i).transpose(), y[static_cast<std::size_t>(i)]);
      return total / n;
    };
    ParameterRefs<double> params;
    head.collect(params);
    for (auto* p : params) p->zero_grad();
    const Eigen::MatrixXd logits = head.forward(x);
    Eigen::MatrixXd dl(n, k);
    for (int i = 0; i < n; ++i) {
      dl.row(i) = (cross_entropy_grad<double>(logits.row(i).transpose(), y[static_cast<std::size_t>(i)]) / n).transpose();
    }
    const Eigen::MatrixXd dx = head.backward(x, dl);
    worst_head = std::max(worst_head, test::gradient_error(params, loss, h));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double saved = x.data()[i];
      x.data()[i] = saved + h;
      const double up = loss();
      x.data()[i] = saved - h;
      const double down = loss();
      x.data()[i] = saved;
      worst_head = std::max(worst_head, rel(dx.data()[i], (up - down) / (2 * h)));
    }
  }
  return {std::max(worst_ce, worst_head) < 1e-4,
          "50 CE + 50 head instances, max relative error CE " + fmt("%.1e", worst_ce) + ", head " +
              fmt("%.1e", worst_head)};
}

// --- 3. oracle equivalence ---------------------------------------------------

double lerp_oracle(const std::vector<double>& seq, double pos) {
  const int lo = static_cast<int>(std::floor(pos));
  const int hi = std::min(lo + 1, static_cast<int>(seq.size()) - 1);
  const double w = pos - lo;
  return (1 - w) * seq[static_cast<std::size_t>(lo)] + w * seq[static_cast<std::size_t>(hi)];
}

struct ScalarAdamW {
  double lr, wd, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  int t = 0;
  void step(std::vector<double>& p, const std::vector<double>& g) {
    if (m.empty()) m.assign(p.size(), 0.0), v.assign(p.size(), 0.0);
    ++t;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t)), vh = v[i] / (1 - std::pow(b2, t));
      p[i] -= lr * (mh / (std::sqrt(vh) + eps) + wd * p[i]);
    }
  }
};

Outcome oracle_equivalence() {
  Engine e(303);
  double sampling = 0, pooling = 0, products = 0, adam = 0, accuracy = 0;

  for (int trial = 0; trial < 40; ++trial) {
    const int src = 1 + static_cast<int>(uniform_index(e, 32));
    const int dst = 1 + static_cast<int>(uniform_index(e, 32));
    FrameStream s;
    s.height = 2;
    s.width = 3;
    s.frames = test::random_matrix(src, 18, e).cwiseAbs().cast<float>();
    const auto out = sample_frames_interpolated(s, dst);
    for (Eigen::Index c = 0; c < 18; ++c) {
      std::vector<double> seq;
      for (int t = 0; t < src; ++t) seq.push_back(s.frames(t, c));
      for (int i = 0; i < dst; ++i) {
        const double pos = dst == 1 ? (src - 1) / 2.0 : static_cast<double>(i) * (src - 1) / (dst - 1);
        sampling = std::max(sampling, static_cast<double>(std::abs(static_cast<float>(lerp_oracle(seq, pos)) - out.frames(i, c))));
      }
    }
    if (src >= dst) {
      const auto idx = uniform_indices(src, dst);
      const auto u = sample_frames_uniform(s, dst);
      for (int i = 0; i < dst; ++i) {
        const int expect = static_cast<int>(std::floor(static_cast<double>(i) * src / dst));
        if (idx[static_cast<std::size_t>(i)] != expect) sampling = std::max(sampling, 1.0);
        sampling = std::max(sampling, static_cast<double>((u.frames.row(i) - s.frames.row(expect)).cwiseAbs().maxCoeff()));
      }
    }

    const int t = 1 + static_cast<int>(uniform_index(e, 32)), d = 1 + static_cast<int>(uniform_index(e, 32));
    const Eigen::MatrixXd f = test::random_matrix(t, d, e);
    const Eigen::VectorXd pooled = temporal_mean_pool(f);
    for (int j = 0; j < d; ++j) {
      double acc = 0;
      for (int i = 0; i < t; ++i) acc += f(i, j);
      pooling = std::max(pooling, std::abs(acc / t - pooled(j)));
    }

    const int k = 1 + static_cast<int>(uniform_index(e, 32)), n = 1 + static_cast<int>(uniform_index(e, 32));
    LinearHead<double> head("h", k, d, e);
    head.bias().value = test::random_matrix(k, 1, e);
    const Eigen::MatrixXd x = test::random_matrix(n, d, e);
    const Eigen::MatrixXd y = head.forward(x);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < k; ++c) {
        double acc = head.bias().value(c, 0);
        for (int j = 0; j < d; ++j) acc += x(r, j) * head.weight().value(c, j);
        products = std::max(products, std::abs(acc - y(r, c)));
      }
    }
  }

  for (int trial = 0; trial < 10; ++trial) {
    const int size = 1 + static_cast<int>(uniform_index(e, 32));
    Parameter<double> p("p", test::random_matrix(size, 1, e));
    std::vector<double> q(p.value.data(), p.value.data() + size);
    const double lr = uniform(e, 1e-4, 1e-2), wd = uniform(e, 0.0, 0.1);
    AdamW<double> opt({&p}, lr, wd);
    ScalarAdamW ref{lr, wd};
    for (int step = 0; step < 32; ++step) {
      const Eigen::MatrixXd g = test::random_matrix(size, 1, e);
      p.grad = g;
      opt.step();
      ref.step(q, std::vector<double>(g.data(), g.data() + size));
    }
    for (int i = 0; i < size; ++i) adam = std::max(adam, std::abs(p.value(i, 0) - q[static_cast<std::size_t>(i)]));
  }

  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(uniform_index(e, 32));
    std::vector<PredictionRecord> records;
    std::vector<int> pred, truth;
    for (int i = 0; i < n; ++i) {
      PredictionRecord r;
      r.sample_id = "r" + std::to_string(i);
      r.scenario = scenario_from_id(static_cast<int>(uniform_index(e, kNumScenarios)));
      r.proficiency = proficiency_from_id(static_cast<int>(uniform_index(e, 4)));
      const Eigen::VectorXd p = test::random_simplex(4, e);
      r.readouts.push_back({"combined", p, argmax(p)});
      pred.push_back(argmax(p));
      truth.push_back(index_of(r.proficiency));
      records.push_back(std::move(r));
    }
    double hits = 0;
    for (int i = 0; i < n; ++i) hits += pred[static_cast<std::size_t>(i)] == truth[static_cast<std::size_t>(i)];
    accuracy = std::max(accuracy, std::abs(hits / n - top1_accuracy(pred, truth)));
    const auto report = per_scenario_report(records, "combined");
    for (const auto s : kAllScenarios) {
      double sn = 0, sc = 0;
      for (int i = 0; i < n; ++i) {
        if (records[static_cast<std::size_t>(i)].scenario != s) continue;
        ++sn;
        sc += pred[static_cast<std::size_t>(i)] == truth[static_cast<std::size_t>(i)];
      }
      const auto got = report.accuracy(s);
      if (sn == 0) {
        if (got) accuracy = std::max(accuracy, 1.0);
      } else {
        accuracy = got ? std::max(accuracy, std::abs(sc / sn - *got)) : 1.0;
      }
    }
  }

  const double worst = std::max({sampling, pooling, products, adam, accuracy});
  return {worst < 1e-8, "max deviation: sampling " + fmt("%.1e", sampling) + ", pooling " + fmt("%.1e", pooling) +
                            ", products " + fmt("%.1e", products) + ", AdamW " + fmt("%.1e", adam) + ", accuracy " +
                            fmt("%.1e", accuracy)};
}

// --- 4. routing ---------------------------------------------------------------

std::map<std::string, std::vector<std::uint8_t>> read_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::vector<std::uint8_t>> out;
  for (const auto& f : std::filesystem::directory_iterator(dir)) out[f.path().filename().string()] = read_file(f.path());
  return out;
}

Outcome routing() {
  DatasetSpec spec;
  spec.clips_per_scenario = 8;
  spec.frames_per_stream = 16;
  spec.height = 32;
  spec.width = 32;
  const auto data = make_data(spec);
  BankConfig cfg;
  cfg.encoder.crop_size = 28;
  cfg.encoder.feature_dim = 16;
  cfg.encoder.hidden_dim = 16;
  cfg.train.epochs = 3;
  cfg.train.learning_rate = 1e-3;
  cfg.frames = 8;
  auto bank = train_classifier_bank(data.train, {}, data.loader, cfg).bank;
  std::ostringstream detail;
  bool ok = bank.size() == 30 && bank.complete();
  detail << bank.size() << " cells";

  test::TempDir before("acc-before"), after("acc-after");
  save_bank(before.path(), bank, cfg);
  DatasetManifest fewer{data.train.root, {}};
  for (const auto& e : data.train.entries) {
    if (!(e.scenario == Scenario::Music && e.proficiency == Proficiency::LateExpert)) fewer.entries.push_back(e);
  }
  retrain_cell(bank, Scenario::Music, View::Exo4, fewer, data.loader, cfg);
  save_bank(after.path(), bank, cfg);
  const auto a = read_dir(before.path()), b = read_dir(after.path());
  const auto target = cell_file_name(Scenario::Music, View::Exo4);
  int identical = 0;
  bool target_changed = false;
  for (const auto& [name, bytes] : a) {
    if (name == kBankIndexFile) continue;
    if (name == target) {
      target_changed = b.count(name) && b.at(name) != bytes;
    } else if (b.count(name) && b.at(name) == bytes) {
      ++identical;
    }
  }
  ok = ok && identical == 29 && target_changed;
  detail << "; after retraining one cell " << identical << "/29 other files byte-identical";

  const ScenarioRecognizer oracle;
  Engine e(404);
  double ego_dev = 0, exo_dev = 0;
  for (const auto& entry : data.val.entries) {
    auto clip = data.loader(entry);
    const auto base = predict_two_stage(bank, oracle, clip).second;
    auto perturbed = clip;
    for (const auto v : kExoViews) {
      auto& f = perturbed.stream(v).frames;
      f = test::random_matrix(f.rows(), f.cols(), e).cwiseAbs().cast<float>();
    }
    const auto moved = predict_two_stage(bank, oracle, perturbed).second;
    ego_dev = std::max(ego_dev, (base.at("ego").probabilities - moved.at("ego").probabilities).cwiseAbs().maxCoeff());
    if (base.at("ego").label != moved.at("ego").label) ego_dev = 1.0;

    for (int trial = 0; trial < 5; ++trial) {
      auto perm = permutation(kNumExoViews, e);
      ViewProbabilities permuted = base.view_probabilities;
      for (std::size_t i = 0; i < kExoViews.size(); ++i) permuted[kExoViews[i]] = base.view_probabilities.at(kExoViews[perm[i]]);
      exo_dev = std::max(exo_dev, (aggregate(permuted, Strategy::ExoAverage) - base.at("exo").probabilities).cwiseAbs().maxCoeff());
    }
  }
  ok = ok && ego_dev == 0.0 && exo_dev < 1e-12;
  detail << "; ego-only change under exo perturbation " << fmt("%.1e", ego_dev) << "; exo-average change under exo permutation "
         << fmt("%.1e", exo_dev);
  return {ok, detail.str()};
}

// --- 5. learnability ----------------------------------------------------------

Outcome learnability() {
  DatasetSpec spec;  // 40 clips per scenario, signal 1.0, noise 0.1
  const BankConfig cfg;  // 20 epochs
  const ScenarioRecognizer oracle;

  const auto signal = make_data(spec);
  const auto bank = train_classifier_bank(signal.train, {}, signal.loader, cfg).bank;
  const double acc = combined_accuracy(two_stage_report(bank, oracle, signal));

  spec.signal_strength = 0.0;
  const auto blank = make_data(spec);
  const auto blank_bank = train_classifier_bank(blank.train, {}, blank.loader, cfg).bank;
  const auto report = two_stage_report(blank_bank, oracle, blank);
  const auto& t = report.column("combined").overall;
  const auto [lo, hi] = binomial_interval(static_cast<int>(t.n), 0.25);
  const int correct = static_cast<int>(t.correct);
  const bool ok = acc >= 0.90 && correct >= lo && correct <= hi;
  return {ok, "signal 1.0: combined " + pct(acc) + " (need >= 90%); signal 0: " + std::to_string(correct) + "/" +
                  std::to_string(t.n) + " correct, 95% interval [" + std::to_string(lo) + ", " + std::to_string(hi) +
                  "]"};
}

// --- 6. view visibility -------------------------------------------------------

Outcome visibility() {
  DatasetSpec spec;
  const Scenario ego_side = Scenario::Cooking, exo_side = Scenario::Soccer;
  for (const auto v : kAllViews) {
    spec.set_visibility(ego_side, v, v == View::Ego ? 1.0 : 0.1);
    spec.set_visibility(exo_side, v, v == View::Ego ? 0.1 : 1.0);
  }
  const auto data = make_data(spec);
  const auto bank = train_classifier_bank(data.train, {}, data.loader, BankConfig{}).bank;
  const auto report = two_stage_report(bank, ScenarioRecognizer{}, data);
  const double ego_a = *report.column("ego").accuracy(ego_side), exo_a = *report.column("exo").accuracy(ego_side);
  const double ego_b = *report.column("ego").accuracy(exo_side), exo_b = *report.column("exo").accuracy(exo_side);
  const bool ok = ego_a - exo_a >= 0.10 && exo_b - ego_b >= 0.10;
  return {ok, std::string(display_name(ego_side)) + " (ego-visible): ego " + pct(ego_a) + " vs exo " + pct(exo_a) + "; " +
                  std::string(display_name(exo_side)) + " (exo-visible): exo " + pct(exo_b) + " vs ego " + pct(ego_b)};
}

// --- 7. scenario conditioning ---------------------------------------------------

Outcome conditioning() {
  // Class k plants pattern (k + scenario) mod 4 and the frames carry no
  // scenario bias, so one pattern means different classes in different
  // scenarios and only the routing knows which.
  DatasetSpec spec;
  spec.pattern_mode = PatternMode::ScenarioPermuted;
  spec.scenario_strength = 0.0;
  const auto data = make_data(spec);
  const BankConfig cfg;
  const ScenarioRecognizer oracle;
  const auto bank = train_classifier_bank(data.train, {}, data.loader, cfg).bank;
  const auto pooled = train_pooled_bank(data.train, {}, data.loader, cfg).bank;
  const double bank_acc = combined_accuracy(two_stage_report(bank, oracle, data));
  const double pooled_acc = combined_accuracy(two_stage_report(pooled, oracle, data));

  // Combined correctness of every validation clip under every routing; a
  // recogniser only picks which entry counts.
  std::vector<std::array<bool, kNumScenarios>> correct;
  std::vector<MultiViewClip> ids;
  for (const auto& entry : data.val.entries) {
    auto clip = data.loader(entry);
    std::array<bool, kNumScenarios> row{};
    for (const auto s : kAllScenarios) {
      auto routed = clip;
      routed.scenario = s;
      row[static_cast<std::size_t>(index_of(s))] =
          predict_two_stage(bank, oracle, routed).second.at("combined").label == index_of(clip.proficiency);
    }
    correct.push_back(row);
    MultiViewClip id;
    id.sample_id = clip.sample_id;
    id.scenario = clip.scenario;
    ids.push_back(std::move(id));
  }

  const std::vector<double> diagonals = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
  const int draws = 20;
  std::vector<double> accs;
  std::ostringstream sweep;
  for (const double d : diagonals) {
    double hits = 0;
    for (int seed = 0; seed < draws; ++seed) {
      const ScenarioRecognizer noisy({RecognizerMode::NoisyOracle, uniform_confusion(d), static_cast<std::uint64_t>(seed)});
      for (std::size_t i = 0; i < ids.size(); ++i) {
        hits += correct[i][static_cast<std::size_t>(index_of(noisy.recognize(ids[i])))] ? 1 : 0;
      }
    }
    accs.push_back(hits / (draws * static_cast<double>(ids.size())));
    sweep << (sweep.tellp() > 0 ? ", " : "") << fmt("%.1f", d) << ":" << pct(accs.back());
  }
  // Spot check the shortcut against the full pipeline at one setting.
  const ScenarioRecognizer check({RecognizerMode::NoisyOracle, uniform_confusion(0.8), 3});
  const double full = combined_accuracy(two_stage_report(bank, check, data));
  double shortcut = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) shortcut += correct[i][static_cast<std::size_t>(index_of(check.recognize(ids[i])))];
  shortcut /= static_cast<double>(ids.size());

  const double rho = spearman(diagonals, accs);
  const bool ok = bank_acc - pooled_acc >= 0.05 && rho > 0.8 && std::abs(full - shortcut) < 1e-12;
  return {ok, "bank " + pct(bank_acc) + " vs pooled " + pct(pooled_acc) + " (need +5 points); noisy sweep " + sweep.str() +
                  ", Spearman rho " + fmt("%.3f", rho)};
}

// --- 8. sub-loss convergence order -------------------------------------------

Outcome convergence_order() {
  DatasetSpec spec;
  spec.signal_strength = 0.3;
  spec.scenario_strength = 1.0;
  const auto data = make_data(spec);
  EncoderConfig enc;
  std::vector<MultiTaskSample> train;
  for (const auto& e : data.train.entries) train.push_back(prepare_multitask_sample(data.loader(e), enc));
  TrainConfig cfg;
  MultiTaskModel<Real> model(enc, ViewFusion::MeanOfPooledViews);

  // Sub-losses of the untrained model over the whole training set.
  std::vector<const MultiTaskSample*> all;
  for (const auto& s : train) all.push_back(&s);
  const auto initial = multitask_batch_loss(model, std::span<const MultiTaskSample* const>(all), false, cfg.alpha);

  const auto curves = train_multitask<Real>(model, train, {}, cfg);
  const auto crossing = [&](auto member, double start) {
    for (const auto& r : curves.epochs) {
      if (*(r.*member) <= 0.5 * start) return r.epoch;
    }
    return 0;
  };
  const int scen = crossing(&EpochRecord::train_scen, *initial.scen);
  const int prof = crossing(&EpochRecord::train_prof, *initial.prof);
  const bool ok = scen > 0 && (prof == 0 || scen < prof);
  const auto when = [](int epoch) { return epoch > 0 ? "epoch " + std::to_string(epoch) : std::string("never"); };
  return {ok, "initial scenario loss " + fmt("%.3f", *initial.scen) + " halves at " + when(scen) +
                  "; initial proficiency loss " + fmt("%.3f", *initial.prof) + " halves at " + when(prof) +
                  "; final " + fmt("%.3f", *curves.epochs.back().train_scen) + " / " +
                  fmt("%.3f", *curves.epochs.back().train_prof)};
}

// --- 9. report fixture ----------------------------------------------------------

Outcome report_fixture() {
  const auto records = test::reference_records();
  const auto text = records_to_jsonl(records);
  const auto csv = report_to_csv(evaluate_records(records_from_jsonl(text), {"ego", "exo", "combined"}));
  const auto expected = read_text_file(std::filesystem::path(PROFPIPE_FIXTURE_DIR) / "report_table3.csv");
  const auto last = csv.substr(csv.rfind("Overall"));
  return {csv == expected, std::to_string(records.size()) + " records; " + (csv == expected ? "byte-identical" : "differs") +
                               "; " + last.substr(0, last.size() - 1)};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> criteria = {
      {1, "exactness", 1, exactness},
      {2, "gradients", 10, gradients},
      {3, "oracle equivalence", 30, oracle_equivalence},
      {4, "routing", 120, routing},
      {5, "learnability", 300, learnability},
      {6, "view visibility", 300, visibility},
      {7, "scenario conditioning", 600, conditioning},
      {8, "scenario sub-loss converges first", 300, convergence_order},
      {9, "report fixture", 1, report_fixture},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s criterion %d: %s | %s | %.2fs (budget %.0fs)%s\n", pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : " over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
