#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "format_fuzz.hpp"
#include "gradcheck.hpp"
#include "melvc/checkpoint.hpp"
#include "melvc/errors.hpp"
#include "melvc/nn/layers.hpp"
#include "melvc/tensor_file.hpp"

using namespace melvc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "melvc_test_formats";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::byte> bytes_of(std::string_view s) {
  std::vector<std::byte> b;
  for (char c : s) b.push_back(static_cast<std::byte>(c));
  return b;
}

}  // namespace

TEST_CASE("MVF1 layout") {
  TensorF32 t;
  t.dims = {2, 3};
  t.data = {1, 2, 3, 4, 5, -0.5f};
  const auto b = serialize_tensor(t);
  REQUIRE(b.size() == 40);
  CHECK(std::memcmp(b.data(), "MVF1", 4) == 0);
  CHECK(b[4] == std::byte{0});
  CHECK(b[5] == std::byte{2});
  CHECK(b[6] == std::byte{0});
  CHECK(b[7] == std::byte{0});
  CHECK(b[8] == std::byte{2});
  CHECK(b[12] == std::byte{3});
  float last = 0;
  std::memcpy(&last, b.data() + 36, 4);
  CHECK(last == -0.5f);

  const auto path = scratch("t.mvf");
  save_tensor(path, t);
  CHECK(fs::file_size(path) == 40);
  CHECK(load_tensor(path) == t);
}

TEST_CASE("MVF1 round trip is bitwise") {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    auto t = testing::fuzz_tensor(rng);
    // odd bit patterns: signed zero, subnormal, infinity, NaN payloads
    const std::uint32_t specials[] = {0x80000000u, 0x00000001u, 0x7f800000u, 0x7fc01234u};
    std::memcpy(&t.data[0], &specials[i % 4], 4);
    const auto b = serialize_tensor(t);
    const auto back = parse_tensor(b);
    CHECK(serialize_tensor(back) == b);
    CHECK(back.dims == t.dims);
  }
  TensorF32 empty;
  empty.dims = {0, 4};
  CHECK(parse_tensor(serialize_tensor(empty)).element_count() == 0);
}

TEST_CASE("MVF1 rejects malformed records") {
  TensorF32 t;
  t.dims = {2, 3};
  t.data.assign(6, 1.0f);
  const auto good = serialize_tensor(t);
  auto bad = good;
  std::memcpy(bad.data(), "XXXX", 4);
  CHECK_THROWS_AS(parse_tensor(bad), FormatError);
  bad = good;
  bad[4] = std::byte{1};
  CHECK_THROWS_AS(parse_tensor(bad), FormatError);
  bad = good;
  bad[6] = std::byte{1};
  CHECK_THROWS_AS(parse_tensor(bad), FormatError);
  bad = good;
  bad.pop_back();
  CHECK_THROWS_AS(parse_tensor(bad), FormatError);
  bad = good;
  bad.push_back(std::byte{0});
  CHECK_THROWS_AS(parse_tensor(bad), FormatError);
  bad = good;
  bad[8] = std::byte{0xff};
  bad[9] = std::byte{0xff};
  bad[10] = std::byte{0xff};
  bad[11] = std::byte{0xff};
  bad[12] = std::byte{0xff};
  bad[13] = std::byte{0xff};
  bad[14] = std::byte{0xff};
  bad[15] = std::byte{0xff};
  CHECK_THROWS_AS(parse_tensor(bad), FormatError);
  CHECK_THROWS_AS(parse_tensor(std::span(good).first(5)), FormatError);
  CHECK_THROWS_AS(load_tensor(scratch("missing.mvf")), NotFoundError);

  TensorF32 mismatch;
  mismatch.dims = {2, 2};
  mismatch.data.assign(3, 0.0f);
  CHECK_THROWS_AS(serialize_tensor(mismatch), FormatError);
}

TEST_CASE("matrix conversion") {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const auto t = from_matrix(m);
  CHECK(t.dims == std::vector<std::uint32_t>{2, 3});
  CHECK(t.data[3] == 4.0f);
  CHECK(to_matrix(t) == m);
  TensorF32 row;
  row.dims = {4};
  row.data = {1, 2, 3, 4};
  CHECK(to_matrix(row).rows() == 1);
  TensorF32 cube;
  cube.dims = {1, 1, 1};
  cube.data = {1};
  CHECK_THROWS_AS(to_matrix(cube), FormatError);
}

TEST_CASE("MVC1 layout") {
  Checkpoint empty;
  const auto b = serialize_checkpoint(empty);
  CHECK(b == std::vector<std::byte>{std::byte{'M'}, std::byte{'V'}, std::byte{'C'}, std::byte{'1'}, std::byte{0},
                                    std::byte{0}, std::byte{0}, std::byte{0}});
  CHECK(parse_checkpoint(b).tensors.empty());
  const auto path = scratch("empty.mvc");
  save_checkpoint(path, empty);
  CHECK(fs::file_size(path) == 8);

  Checkpoint c;
  TensorF32 t;
  t.dims = {1};
  t.data = {2.0f};
  c.tensors.emplace_back("w", t);
  c.metadata = "{}";
  const auto cb = serialize_checkpoint(c);
  // 8 + (2 + 1 + 16) + (2 + 9 + 4 + 2)
  CHECK(cb.size() == 44);
  CHECK(cb[4] == std::byte{2});
  CHECK(cb[8] == std::byte{1});
  CHECK(cb[10] == std::byte{'w'});
  CHECK(std::memcmp(cb.data() + 11, "MVF1", 4) == 0);
}

TEST_CASE("MVC1 save, load, save is byte-identical") {
  nn::ParameterSet ps;
  Rng rng(3);
  nn::DenseLayer::create(ps, "enc.a", 6, 4, nn::Activation::relu, rng);
  nn::DenseLayer::create(ps, "enc.b", 4, 2, nn::Activation::linear, rng);
  Checkpoint c;
  add_parameters(c, ps, "model.");
  c.metadata = R"({"config_hash":"abc","medoid":"utt3","step":12})";
  const auto p1 = scratch("ck1.mvc"), p2 = scratch("ck2.mvc");
  save_checkpoint(p1, c);
  const auto loaded = load_checkpoint(p1);
  CHECK(loaded.warnings.empty());
  CHECK(loaded.checkpoint.metadata == c.metadata);
  save_checkpoint(p2, loaded.checkpoint);
  CHECK(read_file_bytes(p1) == read_file_bytes(p2));
  REQUIRE(loaded.checkpoint.find("model.enc.a.weight") != nullptr);
  CHECK(loaded.checkpoint.find("enc.a.weight") == nullptr);

  nn::ParameterSet fresh;
  Rng other(99);
  nn::DenseLayer::create(fresh, "enc.a", 6, 4, nn::Activation::relu, other);
  nn::DenseLayer::create(fresh, "enc.b", 4, 2, nn::Activation::linear, other);
  restore_parameters(fresh, loaded.checkpoint, "model.");
  for (std::size_t i = 0; i < ps.size(); ++i)
    CHECK((fresh[i].value - ps[i].value.cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(restore_parameters(fresh, loaded.checkpoint, "other."), FormatError);

  nn::ParameterSet wrong;
  nn::DenseLayer::create(wrong, "enc.a", 5, 4, nn::Activation::relu, other);
  CHECK_THROWS_AS(restore_parameters(wrong, loaded.checkpoint, "model."), FormatError);
}

TEST_CASE("config hash mismatch warns and loads") {
  Checkpoint c;
  c.metadata = R"({"config_hash":"aaaa"})";
  TensorF32 t;
  t.dims = {1};
  t.data = {1};
  c.tensors.emplace_back("x", t);
  const auto path = scratch("hash.mvc");
  save_checkpoint(path, c);
  CHECK(load_checkpoint(path, std::string("aaaa")).warnings.empty());
  const auto l = load_checkpoint(path, std::string("bbbb"));
  REQUIRE(l.warnings.size() == 1);
  CHECK(l.warnings[0].find("config hash mismatch") != std::string::npos);
  CHECK(l.checkpoint.find("x") != nullptr);
}

TEST_CASE("MVC1 rejects malformed containers") {
  Checkpoint dup;
  TensorF32 t;
  t.dims = {1};
  t.data = {1};
  dup.tensors.emplace_back("x", t);
  dup.tensors.emplace_back("x", t);
  CHECK_THROWS_AS(serialize_checkpoint(dup), FormatError);
  Checkpoint reserved;
  reserved.tensors.emplace_back(kMetadataEntry, t);
  CHECK_THROWS_AS(serialize_checkpoint(reserved), FormatError);

  CHECK_THROWS_AS(parse_checkpoint(bytes_of("MVC2\0\0\0\0")), FormatError);
  CHECK_THROWS_AS(parse_checkpoint(bytes_of("MVC1")), FormatError);
  auto b = serialize_checkpoint(Checkpoint{});
  b[4] = std::byte{1};
  CHECK_THROWS_AS(parse_checkpoint(b), FormatError);
  b = serialize_checkpoint(Checkpoint{});
  b.push_back(std::byte{0});
  CHECK_THROWS_AS(parse_checkpoint(b), FormatError);

  // the same name written twice by hand
  Checkpoint one;
  one.tensors.emplace_back("x", t);
  auto twice = serialize_checkpoint(one);
  const std::vector<std::byte> entry(twice.begin() + 8, twice.end());
  twice.insert(twice.end(), entry.begin(), entry.end());
  twice[4] = std::byte{2};
  CHECK_THROWS_AS(parse_checkpoint(twice), FormatError);
}

TEST_CASE("header fuzzing yields only clean errors") {
  const auto r = testing::fuzz_formats(1000, 11);
  INFO(r.first_unclean);
  CHECK(r.mutations == 1000);
  CHECK(r.unclean == 0);
  CHECK(r.accepted == 0);
  CHECK(r.rejected == 1000);
}
