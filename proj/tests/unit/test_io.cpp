// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <iterator>
#include <cstring>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "crpl/checkpoint.hpp"
#include "crpl/dataset_io.hpp"
#include "crpl/error.hpp"
#include "crpl/synthetic.hpp"

namespace crpl {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("crpl_io_" + std::to_string(std::random_device{}()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  fs::path root_;
};

std::vector<char> bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no crpl::Error thrown";
  return ErrorCode::InvalidArgument;
}

SyntheticSpec tiny() {
  SyntheticSpec s;
  s.num_classes = 3;
  s.dim = 6;
  s.n_sources = 2;
  s.samples_per_domain = 12;
  s.seed = 5;
  return s;
}

using DatasetIo = TempDir;
using CheckpointIo = TempDir;

TEST_F(DatasetIo, RoundTripIsByteIdentical) {
  const auto bench = generate_synthetic(tiny());
  write_dataset(root_ / "a", bench.data);
  const auto back = read_dataset(root_ / "a");
  EXPECT_EQ(dataset_fingerprint(back), dataset_fingerprint(bench.data));
  write_dataset(root_ / "b", back);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(root_ / "a")) {
    ++files;
    EXPECT_EQ(bytes(entry.path()), bytes(root_ / "b" / entry.path().filename()))
        << entry.path().filename();
  }
  EXPECT_EQ(files, 9u);
  for (std::size_t j = 0; j < back.target.size(); ++j)
    EXPECT_EQ(back.target.raw()[j].values(), bench.data.target.raw()[j].values());
  EXPECT_EQ(back.sources[1].labels(), bench.data.sources[1].labels());
  EXPECT_EQ(back.target_labels, bench.data.target_labels);
  EXPECT_FALSE(back.target.is_labeled());
}

TEST_F(DatasetIo, TruncatedBlob) {
  write_dataset(root_, generate_synthetic(tiny()).data);
  fs::resize_file(root_ / "source_0.f32", fs::file_size(root_ / "source_0.f32") - 4);
  EXPECT_EQ(code_of([&] { read_dataset(root_); }), ErrorCode::TruncatedBlob);
}

TEST_F(DatasetIo, LabelsOnUnlabeledDomain) {
  write_dataset(root_, generate_synthetic(tiny()).data);
  fs::copy_file(root_ / "source_0.labels.u32", root_ / "target.labels.u32");
  EXPECT_EQ(code_of([&] { read_dataset(root_); }), ErrorCode::SchemaMismatch);
}

TEST_F(DatasetIo, MissingAndMalformedManifest) {
  EXPECT_EQ(code_of([&] { read_dataset(root_ / "nope"); }), ErrorCode::IoFailure);
  write_dataset(root_, generate_synthetic(tiny()).data);
  std::ofstream(root_ / "manifest.json") << "{\"schema_version\": 1, \"d\": 6}";
  EXPECT_EQ(code_of([&] { read_dataset(root_); }), ErrorCode::SchemaMismatch);
  std::ofstream(root_ / "manifest.json") << "not json";
  EXPECT_EQ(code_of([&] { read_dataset(root_); }), ErrorCode::SchemaMismatch);
}

TEST_F(DatasetIo, LittleEndianFloats) {
  auto data = generate_synthetic(tiny()).data;
  write_dataset(root_, data);
  const auto b = bytes(root_ / "classes.f32");
  const float first = static_cast<float>(data.text.class_tokens(0, 0));
  std::uint32_t bits;
  std::memcpy(&bits, &first, 4);
  for (int i = 0; i < 4; ++i)
    EXPECT_EQ(static_cast<unsigned char>(b[static_cast<std::size_t>(i)]), (bits >> (8 * i)) & 0xffu);
}

PromptBank random_bank(std::size_t d) {
  const auto bench = generate_synthetic(tiny());
  auto bank = PromptBank::initialize({3, 2, 4, 3, d}, bench.data.text.class_tokens,
                                     bench.data.text.base_context, 9, 0.3);
  return bank;
}

TEST_F(CheckpointIo, RoundTripWithinFloatPrecision) {
  const auto bank = random_bank(6);
  const TextEncoder enc(6, 6, 6, 5);
  OptimizerState opt{bank.learnable().zeros_like(), 17, 40, 3};
  opt.momentum.target.setConstant(0.125);
  save_checkpoint(root_ / "a", bank, enc, &opt);
  const auto back = load_checkpoint(root_ / "a");
  LearnablePrompts diff = back.bank.learnable();
  diff.add_scaled(bank.learnable(), -1.0);
  double worst = 0.0;
  diff.for_each_block([&](const Matrix& m) { worst = std::max(worst, m.cwiseAbs().maxCoeff()); });
  EXPECT_LE(worst, 6e-8);
  EXPECT_EQ(back.bank.class_tokens(), bank.class_tokens());
  EXPECT_EQ(back.bank.base_context(), bank.base_context());
  ASSERT_TRUE(back.optimizer.has_value());
  EXPECT_EQ(back.optimizer->step, 17u);
  EXPECT_EQ(back.optimizer->total_steps, 40u);
  EXPECT_EQ(back.optimizer->epoch, 3u);
  EXPECT_EQ(back.optimizer->momentum.target, opt.momentum.target);
  EXPECT_EQ(back.make_encoder().w1(), enc.w1());

  save_checkpoint(root_ / "b", back.bank, back.make_encoder(), &*back.optimizer);
  for (const auto& entry : fs::directory_iterator(root_ / "a"))
    EXPECT_EQ(bytes(entry.path()), bytes(root_ / "b" / entry.path().filename()));
}

TEST_F(CheckpointIo, WrongDimension) {
  save_checkpoint(root_, random_bank(6), TextEncoder(6, 6, 6, 5));
  CheckpointExpectation expect;
  expect.embed_dim = 64;
  EXPECT_EQ(code_of([&] { load_checkpoint(root_, expect); }), ErrorCode::SchemaMismatch);
  expect.embed_dim = 6;
  EXPECT_FALSE(load_checkpoint(root_, expect).optimizer.has_value());
}

TEST_F(CheckpointIo, TruncatedAndMissing) {
  EXPECT_EQ(code_of([&] { load_checkpoint(root_ / "none"); }), ErrorCode::IoFailure);
  save_checkpoint(root_, random_bank(6), TextEncoder(6, 6, 6, 5));
  fs::resize_file(root_ / "target.f32", 8);
  EXPECT_EQ(code_of([&] { load_checkpoint(root_); }), ErrorCode::TruncatedBlob);
  fs::remove(root_ / "source_1.f32");
  EXPECT_EQ(code_of([&] { load_checkpoint(root_); }), ErrorCode::IoFailure);
}

}  // namespace
}  // namespace crpl
