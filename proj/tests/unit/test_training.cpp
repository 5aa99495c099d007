#include <doctest.h>

#include <cmath>

#include "mito/datapipe/dataset.hpp"
#include "mito/datapipe/synth.hpp"
#include "mito/error.hpp"
#include "mito/nn/tensor_convert.hpp"
#include "mito/nn/training.hpp"
#include "mito/targets.hpp"

using namespace mito;

namespace {

RunConfig small_run(int track) {
  auto cfg = RunConfig::for_track(track);
  cfg.net.depth = 3;
  cfg.net.base_channels = 8;
  cfg.net.embed_dim = 16;
  cfg.net.refine_blocks = 1;
  cfg.augment.out_size = 64;
  cfg.augment.crop_size = 91;
  cfg.train.tile_size = 128;
  cfg.train.cls_patch = 48;
  cfg.train.batch_size = 4;
  return cfg;
}

std::vector<datapipe::DatasetCase> synth_cases(int n, uint64_t seed, int size = 256) {
  datapipe::SynthConfig sc;
  sc.n_cases = n;
  sc.n_domains = 2;
  sc.width = sc.height = size;
  sc.nuclei_per_image = 8;
  sc.seed = seed;
  std::vector<datapipe::DatasetCase> out;
  for (const auto& c : datapipe::synth_dataset(sc)) out.push_back(datapipe::to_dataset_case(c));
  return out;
}

}  // namespace

TEST_CASE("AdamW matches a hand-stepped update") {
  for (double wd : {0.0, 0.01}) {
    auto p = torch::tensor({1.0}, torch::TensorOptions().dtype(torch::kDouble).requires_grad(true));
    torch::optim::AdamW opt({p}, torch::optim::AdamWOptions(0.1).weight_decay(wd));
    double x = 1.0, m = 0.0, v = 0.0;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.1;
    for (int t = 1; t <= 20; ++t) {
      opt.zero_grad();
      ((p - 3.0) * (p - 3.0)).sum().backward();
      opt.step();
      const double g = 2.0 * (x - 3.0);
      x *= 1.0 - lr * wd;
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
      x -= lr * mh / (std::sqrt(vh) + eps);
      CHECK(p.item<double>() == doctest::Approx(x).epsilon(1e-12));
    }
  }
}

TEST_CASE("teacher confidence rule") {
  auto probs = torch::zeros({4, 1, 3});
  probs[0][0][0] = 0.9;
  probs[1][0][0] = 0.1;
  probs[0][0][1] = 0.2;
  probs[1][0][1] = 0.8;
  probs[0][0][2] = 0.3;
  probs[1][0][2] = 0.2;
  probs[2][0][2] = 0.5;
  const auto m = teacher::confidence_labels(probs, 0.7);
  CHECK(m.at(0, 0) == Label::kBackground);
  CHECK(m.at(1, 0) == Label::kNucleus);
  CHECK(m.at(2, 0) == Label::kIgnore);

  // Mass on the other classes does not dilute the confidence.
  auto shared = torch::zeros({4, 1, 1});
  shared[0][0][0] = 0.36;
  shared[1][0][0] = 0.04;
  shared[3][0][0] = 0.6;
  CHECK(teacher::confidence_labels(shared, 0.7).at(0, 0) == Label::kBackground);
}

TEST_CASE("teacher sync and isolation") {
  auto cfg = small_run(1);
  auto student = net::build(cfg.net, 1);
  auto t = teacher::Teacher::from_model(student, 0.7);
  CHECK(t.source() == teacher::TeacherSource::WarmupCheckpoint);
  CHECK_FALSE(t.is_classical());
  CHECK(t.sync_count() == 0);
  const auto before = t.checksum();

  const auto cases = synth_cases(2, 4);
  training::configure_determinism(1);
  auto opt = training::make_optimizer(student, cfg.train);
  student->train();
  for (int step = 0; step < 3; ++step) {
    std::vector<training::Sample> batch;
    for (int i = 0; i < 2; ++i) batch.push_back(training::detection_sample(cases[i], 10 * step + i, cfg));
    auto bl = training::batch_loss(student, batch, t, cfg);
    CHECK(std::isfinite(bl.total.total.item<double>()));
    CHECK_FALSE(bl.parts.cls.defined());
    opt->zero_grad();
    bl.total.total.backward();
    opt->step();
  }
  CHECK(t.checksum() == before);
  CHECK(net::parameter_checksum(*student) != before);
  for (const auto& p : t.model()->parameters()) CHECK_FALSE(p.requires_grad());

  CHECK(t.maybe_sync(student, 0.5));
  CHECK_FALSE(t.maybe_sync(student, 0.4));
  CHECK_FALSE(t.maybe_sync(student, 0.5));
  CHECK(t.maybe_sync(student, 0.7));
  CHECK(t.sync_count() == 2);
  CHECK(t.last_sync_metric() == 0.7);
  CHECK(t.checksum() == net::parameter_checksum(*student));
}

TEST_CASE("classical teacher") {
  const auto cases = synth_cases(1, 6);
  const auto t = teacher::Teacher::classical(imaging::PseudoMaskParams{}, 0.7);
  CHECK(t.is_classical());
  CHECK(t.checksum() == 0);
  const auto got = t.pseudomask(cases[0].image);
  const auto expect = teacher::pseudo_from_binary(imaging::classical_pseudomask(cases[0].image, {}).mask);
  CHECK(got.data == expect.data);
}

TEST_CASE("samples") {
  auto cfg = small_run(2);
  const auto cases = synth_cases(1, 8);
  const auto s = training::detection_sample(cases[0], 3, cfg);
  CHECK(s.weak.width() == 64);
  CHECK(s.strong.height() == 64);
  CHECK(s.annotated.width == 64);
  for (const auto& p : s.points) CHECK(s.annotated.at(int(p.x), int(p.y)) == Label::kMitosis);

  for (const auto& a : cases[0].annotations) {
    if (a.kind != datapipe::AnnotationKind::Mitosis) continue;
    const auto st = training::subtype_sample(cases[0], a, 5, cfg);
    CHECK(st.weak.width() == 64);
    CHECK((st.subtype == 0 || st.subtype == 1));
    REQUIRE_FALSE(st.points.empty());
    CHECK(std::hypot(st.points[0].x - 32, st.points[0].y - 32) < 2.0);
  }
  auto small = cfg;
  small.train.tile_size = 64;
  CHECK_THROWS_AS(training::detection_sample(cases[0], 1, small), Error);
}

TEST_CASE("nuclei warm-up learns the nucleus mask") {
  auto cfg = small_run(1);
  cfg.train.warmup_epochs_nuclei = 12;
  cfg.train.samples_per_case = 8;
  cfg.train.seed = 2;
  training::configure_determinism(1);
  const auto cases = synth_cases(4, 12);
  auto model = net::build(cfg.net, 2);
  training::run_warmup(model, cases, cfg);

  const auto held = synth_cases(1, 99);
  torch::NoGradGuard g;
  model->eval();
  const auto logits = model->segment(net::image_to_tensor(held[0].image));
  const auto pred = logits.argmax(1)[0].contiguous();
  const auto* pp = pred.data_ptr<int64_t>();
  double tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < held[0].truth->data.size(); ++i) {
    const bool t = held[0].truth->data[i] != Label::kBackground;
    const bool p = pp[i] == Label::kNucleus;
    tp += t && p;
    fp += !t && p;
    fn += t && !p;
  }
  const double f1 = 2 * tp / (2 * tp + fp + fn);
  MESSAGE("warm-up nucleus pixel F1 " << f1);
  CHECK(f1 >= 0.8);
}
