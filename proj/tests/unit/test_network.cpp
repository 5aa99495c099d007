#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>

#include "mito/error.hpp"
#include "mito/nn/checkpoint.hpp"
#include "mito/nn/network.hpp"
#include "mito/nn/tensor_convert.hpp"

using namespace mito;

namespace {

NetConfig tiny() {
  NetConfig c;
  c.depth = 3;
  c.base_channels = 8;
  c.embed_dim = 16;
  c.refine_blocks = 1;
  return c;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("forward shapes and embedding norm") {
  torch::NoGradGuard g;
  auto net = net::build(tiny(), 1);
  const auto x = torch::rand({2, 3, 32, 48});
  const auto b = net->forward(x);
  CHECK(b.seg_logits.sizes() == torch::IntArrayRef({2, 4, 32, 48}));
  CHECK(b.pyramid.size() == 3);
  CHECK(b.pyramid[2].sizes() == torch::IntArrayRef({2, 32, 8, 12}));
  CHECK(b.embedding.sizes() == torch::IntArrayRef({2, 16}));
  CHECK(torch::allclose(b.embedding.norm(2, 1), torch::ones({2}), 1e-5, 1e-5));
  CHECK(b.domain_logits.sizes() == torch::IntArrayRef({2, 4}));
  CHECK(b.cls_logit.sizes() == torch::IntArrayRef({2}));
  CHECK(torch::equal(net->segment(x), b.seg_logits));

  CHECK(kind_of([&] { net->forward(torch::rand({1, 3, 30, 32})); }) == ErrorKind::ShapeMismatch);
  CHECK(kind_of([&] { net->forward(torch::rand({1, 1, 32, 32})); }) == ErrorKind::ShapeMismatch);
  auto bad = tiny();
  bad.depth = 1;
  CHECK(kind_of([&] { net::build(bad, 0); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("seeded construction and cloning") {
  auto a = net::build(tiny(), 5);
  auto b = net::build(tiny(), 5);
  auto c = net::build(tiny(), 6);
  CHECK(net::parameter_checksum(*a) == net::parameter_checksum(*b));
  CHECK(net::parameter_checksum(*a) != net::parameter_checksum(*c));
  CHECK(net::parameter_count(*a) > 0);
  auto d = net::clone_model(a);
  CHECK(net::parameter_checksum(*d) == net::parameter_checksum(*a));
  {
    torch::NoGradGuard g;
    d->parameters().front().add_(1.0);
  }
  CHECK(net::parameter_checksum(*d) != net::parameter_checksum(*a));
}

TEST_CASE("attention gates") {
  torch::manual_seed(3);
  net::AttentionBlock att(16);
  const auto x = torch::randn({2, 16, 8, 8});
  const auto cg = att->channel_gate(x);
  const auto sg = att->spatial_gate(x);
  CHECK(cg.gt(0).all().item<bool>());
  CHECK(cg.lt(1).all().item<bool>());
  CHECK(sg.gt(0).all().item<bool>());
  CHECK(sg.lt(1).all().item<bool>());
  CHECK(sg.sizes() == torch::IntArrayRef({2, 1, 8, 8}));
  att->force_identity(true);
  CHECK(torch::equal(att->forward(x), x));

  net::SEGate se(12, 4);
  const auto v = torch::randn({3, 12});
  const auto out = se->forward(v);
  CHECK(out.abs().le(v.abs() + 1e-7).all().item<bool>());
  se->force_identity(true);
  CHECK(torch::equal(se->forward(v), v));
}

TEST_CASE("gradient reversal") {
  auto x = torch::tensor({3.0}, torch::requires_grad());
  auto u = net::grl(x, 0.5);
  CHECK(u.item<double>() == 3.0);
  (u * u).sum().backward();
  CHECK(x.grad().item<double>() == doctest::Approx(-3.0));

  auto y = torch::tensor({3.0}, torch::requires_grad());
  auto w = net::grl(y, 0.0);
  (w * w).sum().backward();
  CHECK(y.grad().item<double>() == 0.0);
  CHECK(kind_of([&] { net::grl(y, -1.0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("checkpoint round trip") {
  auto net = net::build(tiny(), 9);
  const auto dir = std::filesystem::temp_directory_path() / "mito_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "m.ckpt";
  net::save_checkpoint(path, net, {{"epoch", 4}});
  auto ck = net::load_checkpoint(path);
  CHECK(ck.meta["epoch"].get<int>() == 4);
  CHECK(net::parameter_checksum(*ck.model) == net::parameter_checksum(*net));
  CHECK(ck.model->config().base_channels == 8);
  {
    torch::NoGradGuard g;
    net->eval();
    ck.model->eval();
    const auto x = torch::rand({1, 3, 32, 32});
    CHECK(torch::equal(net->segment(x), ck.model->segment(x)));
  }
  {
    std::ifstream in(path, std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    CHECK(std::string(magic, 8) == "MITOCKPT");
  }
  CHECK(kind_of([&] { net::load_checkpoint(dir / "absent.ckpt"); }) == ErrorKind::MissingCheckpoint);
  {
    std::ofstream out(dir / "junk.ckpt", std::ios::binary);
    out << "MITOCKPTgarbage";
  }
  CHECK(kind_of([&] { net::load_checkpoint(dir / "junk.ckpt"); }) == ErrorKind::Io);
  std::filesystem::remove_all(dir);
}

TEST_CASE("tensor conversion") {
  Image img(3, 2);
  img.rgb.at(2, 1, 0) = 255;
  img.rgb.at(0, 0, 2) = 51;
  const auto t = net::image_to_tensor(img);
  CHECK(t.sizes() == torch::IntArrayRef({1, 3, 2, 3}));
  CHECK(t[0][0][1][2].item<float>() == 1.0f);
  CHECK(t[0][2][0][0].item<float>() == doctest::Approx(0.2));
  MultiClassMask m(3, 2, 1, 0);
  m.at(1, 1) = 255;
  const auto mt = net::masks_to_tensor({&m});
  CHECK((mt.scalar_type() == torch::kInt64));
  CHECK(mt[0][1][1].item<int64_t>() == 255);
}
