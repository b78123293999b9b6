#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "vlab/serialize.hpp"

using namespace vlab;

namespace {
std::filesystem::path tmp_dir() {
  auto p = std::filesystem::temp_directory_path() / "vlab_serialize_test";
  std::filesystem::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("tensor container round trip") {
  Rng rng(7);
  Tensor t = uniform<float>({3, 4, 5}, rng, -10.0f, 10.0f);
  std::ostringstream os;
  write_tensor(os, t);
  const std::string bytes = os.str();

  // header layout: magic, version u16, dtype u8, rank u8, extents u64
  CHECK(bytes.substr(0, 4) == "AT3D");
  CHECK(uint8_t(bytes[6]) == 0);  // real32
  CHECK(uint8_t(bytes[7]) == 3);  // rank

  std::istringstream is(bytes);
  Tensor back = read_tensor<float>(is);
  CHECK(back.shape() == t.shape());
  CHECK(std::memcmp(back.data(), t.data(), size_t(t.numel()) * sizeof(float)) == 0);
}

TEST_CASE("double tensors round trip through the real32 container") {
  TensorT<double> t = from_values<double>({2}, {0.5, -0.25});
  std::ostringstream os;
  write_tensor(os, t);
  std::istringstream is(os.str());
  TensorT<double> back = read_tensor<double>(is);
  CHECK(back.data()[0] == 0.5);
  CHECK(back.data()[1] == -0.25);
}

TEST_CASE("bad magic and truncation are container errors") {
  {
    std::istringstream is("NOPE....");
    CHECK_THROWS_AS((void)read_tensor<float>(is), Error);
  }
  {
    Tensor t = ones<float>({4, 4});
    std::ostringstream os;
    write_tensor(os, t);
    std::string bytes = os.str();
    bytes.resize(bytes.size() / 2);  // truncate payload
    std::istringstream is(bytes);
    CHECK_THROWS_AS((void)read_tensor<float>(is), Error);
  }
}

TEST_CASE("file save and load") {
  auto path = tmp_dir() / "t.at3d";
  Tensor t = from_values<float>({5}, {1, 2, 3, 4, 5});
  save_tensor(path, t);
  Tensor back = load_tensor<float>(path);
  CHECK(back.shape() == Shape{5});
  CHECK(back.data()[4] == 5.0f);
}

TEST_CASE("atomic file leaves no partial artifact on abandonment") {
  auto dir = tmp_dir();
  auto path = dir / "atomic.txt";
  std::filesystem::remove(path);
  {
    AtomicFile f(path);
    f.stream() << "partial";
    // no commit: destructor must clean up
  }
  CHECK(!std::filesystem::exists(path));
  {
    AtomicFile f(path);
    f.stream() << "full";
    f.commit();
  }
  CHECK(std::filesystem::exists(path));
  std::ifstream is(path);
  std::string content;
  std::getline(is, content);
  CHECK(content == "full");
}
