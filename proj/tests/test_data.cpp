#include "doctest.h"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "lgfed/common/error.hpp"
#include "lgfed/data/dataset.hpp"
#include "lgfed/data/idx.hpp"
#include "lgfed/data/partition.hpp"
#include "lgfed/data/privacy.hpp"
#include "lgfed/data/tabular.hpp"
#include "lgfed/data/transform.hpp"

using namespace lgfed;
using namespace lgfed::data;
namespace fs = std::filesystem;

namespace {

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                     const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> b;
  put_be32(b, 0x803);
  put_be32(b, count);
  put_be32(b, rows);
  put_be32(b, cols);
  b.insert(b.end(), pixels.begin(), pixels.end());
  return b;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> b;
  put_be32(b, 0x801);
  put_be32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "lgfed_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

void write_gzip(const fs::path& p, const std::vector<std::uint8_t>& b) {
  gzFile f = gzopen(p.string().c_str(), "wb");
  REQUIRE(f != nullptr);
  gzwrite(f, b.data(), static_cast<unsigned>(b.size()));
  gzclose(f);
}

Dataset labelled(std::vector<int> labels, int classes, std::size_t dim = 2) {
  Dataset d;
  d.num_classes = classes;
  d.features.resize(static_cast<nn::Index>(labels.size()), static_cast<nn::Index>(dim));
  for (nn::Index i = 0; i < d.features.rows(); ++i)
    for (nn::Index j = 0; j < d.features.cols(); ++j) d.features(i, j) = static_cast<double>(i * 10 + j);
  d.labels = std::move(labels);
  return d;
}

Dataset balanced(std::size_t per_class, int classes, std::size_t dim = 2) {
  std::vector<int> y;
  for (std::size_t i = 0; i < per_class * static_cast<std::size_t>(classes); ++i)
    y.push_back(static_cast<int>(i % static_cast<std::size_t>(classes)));
  return labelled(std::move(y), classes, dim);
}

std::string data_dir() { return LGFED_TEST_DATA_DIR; }

}  // namespace

TEST_CASE("idx decoding and normalization") {
  const auto img = idx_images(1, 2, 2, {0, 0, 0, 0});
  const auto lab = idx_labels({3});
  IdxLoadOptions opt;
  opt.normalization = {0.1307, 0.3081};
  const auto d = decode_idx(img, lab, opt);
  REQUIRE(d.rows() == 1);
  REQUIRE(d.dim() == 4);
  for (int j = 0; j < 4; ++j) CHECK(d.features(0, j) == doctest::Approx(-0.1307 / 0.3081));
  CHECK(d.labels[0] == 3);

  const auto full = decode_idx(idx_images(2, 1, 2, {255, 0, 51, 255}), idx_labels({1, 2}));
  CHECK(full.features(0, 0) == 1.0);
  CHECK(full.features(0, 1) == 0.0);
  CHECK(full.features(1, 0) == doctest::Approx(0.2));

  opt.max_rows = 1;
  CHECK(decode_idx(idx_images(2, 1, 2, {255, 0, 51, 255}), idx_labels({1, 2}), opt).rows() == 1);
}

TEST_CASE("idx format errors carry byte offsets") {
  auto bad_magic = idx_images(1, 2, 2, {0, 0, 0, 0});
  bad_magic[3] = 0x04;
  try {
    decode_idx(bad_magic, idx_labels({0}));
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }

  const auto short_payload = idx_images(2, 2, 2, {0, 0, 0, 0});
  try {
    decode_idx(short_payload, idx_labels({0, 1}));
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == short_payload.size());
  }

  auto truncated_header = idx_images(1, 2, 2, {});
  truncated_header.resize(10);
  try {
    parse_idx_images(truncated_header);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 10);
  }

  CHECK_THROWS_AS(decode_idx(idx_images(1, 1, 1, {0, 7}), idx_labels({0})), FormatError);
  CHECK_THROWS_AS(decode_idx(idx_images(1, 1, 1, {0}), idx_labels({0, 1})), FormatError);
  CHECK_THROWS_AS(parse_idx_labels(idx_images(1, 1, 1, {0})), FormatError);
  CHECK_THROWS_AS(decode_idx(idx_images(1, 1, 1, {0}), idx_labels({12})), FormatError);
  CHECK_THROWS_AS(load_idx_images("/nonexistent/a", "/nonexistent/b"), IoError);
}

TEST_CASE("idx files load plain and gzipped") {
  const std::vector<std::uint8_t> px{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  const auto img = idx_images(3, 2, 2, px);
  const auto lab = idx_labels({0, 1, 2});
  write_bytes(temp_file("img"), img);
  write_bytes(temp_file("lab"), lab);
  write_gzip(temp_file("img.gz"), img);
  write_gzip(temp_file("lab.gz"), lab);
  const auto plain = load_idx_images(temp_file("img"), temp_file("lab"));
  const auto gz = load_idx_images(temp_file("img.gz"), temp_file("lab.gz"));
  CHECK(plain.features == gz.features);
  CHECK(plain.labels == gz.labels);
  CHECK(gz.features(2, 3) == doctest::Approx(12 / 255.0));

  // truncated gzip member
  auto raw = read_file_bytes(temp_file("img.gz"));
  std::ifstream in(temp_file("img.gz"), std::ios::binary);
  std::vector<std::uint8_t> packed((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  packed.resize(packed.size() / 2);
  write_bytes(temp_file("cut.gz"), packed);
  CHECK_THROWS_AS(read_file_bytes(temp_file("cut.gz")), FormatError);
}

TEST_CASE("official mnist files") {
  const fs::path dir = fs::path(data_dir()) / "mnist";
  if (!fs::exists(dir / "train-images-idx3-ubyte.gz")) {
    MESSAGE("MNIST files not present; skipping");
    return;
  }
  const auto bytes = read_file_bytes(dir / "train-images-idx3-ubyte.gz");
  const auto hdr = parse_idx_images(bytes);
  CHECK(hdr.count == 60000);
  CHECK(hdr.rows * hdr.cols == 784);
  IdxLoadOptions opt;
  opt.max_rows = 100;
  const auto d = load_idx_images(dir / "train-images-idx3-ubyte.gz", dir / "train-labels-idx1-ubyte.gz", opt);
  CHECK(d.rows() == 100);
  CHECK(d.dim() == 784);
  CHECK(d.labels[0] == 5);  // the first training digit
  const auto test = load_idx_images(dir / "t10k-images-idx3-ubyte.gz", dir / "t10k-labels-idx1-ubyte.gz");
  CHECK(test.rows() == 10000);
}

TEST_CASE("tabular encoding") {
  TabularSchema s;
  s.columns = {{"c", ColumnRole::categorical, {}}, {"x", ColumnRole::numeric, {}}, {"y", ColumnRole::label, {}}};
  s.label_positive = {"yes"};
  auto load = load_csv_text({"a,5,yes\nb,5,no\n"}, s);
  // one-hot a/b plus one numeric column
  REQUIRE(load.data.dim() == 3);
  CHECK(load.feature_names == std::vector<std::string>{"c=a", "c=b", "x"});
  CHECK(load.data.features(0, 0) == 1.0);
  CHECK(load.data.features(0, 1) == 0.0);
  CHECK(load.data.features(1, 1) == 1.0);
  CHECK(load.data.features(0, 2) == 0.0);  // constant column standardizes to zero
  CHECK(load.data.features(1, 2) == 0.0);
  CHECK(load.data.labels == std::vector<int>{1, 0});
  CHECK(load.data.num_classes == 2);

  // constant non-representable value
  load = load_csv_text({"a,0.1,yes\nb,0.1,no\na,0.1,no\n"}, s);
  CHECK(load.data.features.col(2).cwiseAbs().maxCoeff() == 0.0);

  // standardization against a direct computation
  load = load_csv_text({"a,1,yes\nb,2,no\na,6,no\n"}, s);
  const double mean = 3.0, sd = std::sqrt((4.0 + 1.0 + 9.0) / 3.0);
  CHECK(load.data.features(2, 2) == doctest::Approx((6 - mean) / sd));
}

TEST_CASE("tabular missing values, filters, declared categories") {
  TabularSchema s;
  s.columns = {{"c", ColumnRole::categorical, {"a", "b"}},
               {"x", ColumnRole::numeric, {}},
               {"g", ColumnRole::protected_attr, {}},
               {"y", ColumnRole::label, {}}};
  s.protected_positive = {"p"};
  const std::string text = "a,1,p,k1\nzz,2,q,k2\n?,3,p,k1\nb,?,q,k2\nb,4,r,k3\n";
  auto load = load_csv_text({text}, s);
  CHECK(load.rows_read == 5);
  CHECK(load.dropped_missing == 2);
  CHECK(load.data.rows() == 3);
  CHECK(load.unknown_categories == 1);
  CHECK(load.feature_names.back() == "x");
  CHECK(load.data.dim() == 4);  // a, b, other, x
  CHECK(load.data.features(1, 2) == 1.0);  // zz -> other slot
  CHECK(load.data.protected_attr == std::vector<int>{1, 0, 0});
  CHECK(load.data.num_classes == 3);  // multi-class label by sorted value
  CHECK(load.data.labels == std::vector<int>{0, 1, 2});

  s.missing_policy = MissingPolicy::category;
  s.columns[0].categories.clear();
  load = load_csv_text({text}, s);
  CHECK(load.dropped_missing == 1);  // numeric missing still drops
  CHECK(load.data.rows() == 4);
  CHECK(std::count(load.feature_names.begin(), load.feature_names.end(), "c=Unknown") == 1);

  s.drop_first = true;
  load = load_csv_text({text}, s);
  CHECK(load.data.dim() == 4);  // {Unknown, a, b, zz} minus the first, plus x

  s.filters = {{"g", {"p"}}};
  load = load_csv_text({text}, s);
  CHECK(load.dropped_filter == 3);
  CHECK(load.data.rows() == 2);

  CHECK_THROWS_AS(load_csv_text({"a,1\n"}, s), FormatError);
  CHECK_THROWS_AS(load_csv_text({"a,notnum,p,k\n"}, s), DataError);
}

TEST_CASE("schema json") {
  const auto s = parse_schema_json(R"({"drop_first": true, "missing_policy": "category",
    "comment_prefix": "|", "columns": [{"name": "a", "role": "categorical", "categories": ["x"]},
    {"name": "y", "role": "label"}], "label_positive": ["1"]})");
  CHECK(s.drop_first);
  CHECK(s.missing_policy == MissingPolicy::category);
  CHECK(s.columns.size() == 2);
  CHECK(s.columns[0].categories == std::vector<std::string>{"x"});
  CHECK_THROWS_AS(parse_schema_json("{"), ConfigError);
  CHECK_THROWS_AS(parse_schema_json(R"({"columns": [{"name": "a", "role": "weird"}]})"), ConfigError);
  CHECK_THROWS_AS(load_csv_text({"1\n"}, parse_schema_json(R"({"columns": [{"name": "a", "role": "numeric"}]})")),
                  ConfigError);
}

TEST_CASE("uci adult schema yields 93 features") {
  const fs::path dir = fs::path(data_dir()) / "adult";
  if (!fs::exists(dir / "adult.data")) {
    MESSAGE("adult files not present; skipping");
    return;
  }
  const auto schema = load_schema(dir / "adult.schema.json");
  const auto train = load_csv_tabular({dir / "adult.data"}, schema);
  CHECK(train.data.dim() == 93);
  CHECK(train.data.rows() == 30940);
  const auto pooled = load_csv_tabular({dir / "adult.data", dir / "adult.test"}, schema);
  CHECK(pooled.data.dim() == 93);
  CHECK(pooled.data.rows() == 46447);
  CHECK(pooled.unknown_categories == 0);
  const double black = std::accumulate(pooled.data.protected_attr.begin(), pooled.data.protected_attr.end(), 0.0);
  CHECK(black / 46447.0 == doctest::Approx(0.10087).epsilon(1e-3));
  const double pos = std::accumulate(pooled.data.labels.begin(), pooled.data.labels.end(), 0.0);
  CHECK(pos / 46447.0 == doctest::Approx(0.24055).epsilon(1e-3));
}

TEST_CASE("iid partition") {
  const auto d = balanced(100, 10);
  PartitionPlan plan;
  plan.mode = PartitionMode::iid;
  plan.devices = 10;
  plan.seed = 3;
  const auto r = partition(d, plan);
  REQUIRE(r.shards.size() == 10);
  CHECK(r.dropped.empty());
  for (const auto& s : r.shards) {
    CHECK(s.n_train() + s.n_validation() + s.n_test() == 100);
    CHECK(s.n_train() == 80);
    CHECK(s.n_validation() == 10);
    CHECK(s.n_test() == 10);
    // class counts of 100 draws from a uniform 10-class pool, 4 sigma band
    std::vector<std::size_t> h(10, 0);
    for (auto rows : {&s.train_rows, &s.validation_rows, &s.test_rows})
      for (auto i : *rows) ++h[static_cast<std::size_t>(d.labels[i])];
    const double sigma = std::sqrt(100 * 0.1 * 0.9);
    for (auto c : h) CHECK(std::abs(static_cast<double>(c) - 10.0) <= 4 * sigma);
  }
}

TEST_CASE("shard partition on mnist-sized class counts") {
  // official MNIST train class counts
  const std::vector<std::size_t> counts{5923, 6742, 5958, 6131, 5842, 5421, 5918, 6265, 5851, 5949};
  // 300-row class-pure shards only give 194 of the 200 needed
  auto shards_at = [&](std::size_t s) {
    std::size_t k = 0;
    for (auto c : counts) k += c / s;
    return k;
  };
  CHECK(shards_at(300) == 194);
  std::size_t brute = 0;
  for (std::size_t s = 1; s <= 300; ++s)
    if (shards_at(s) >= 200) brute = s;
  CHECK(brute == 293);
  CHECK(class_pure_shard_size(counts, 200) == brute);
  CHECK(class_pure_shard_size(std::vector<std::size_t>(10, 600), 20) == 300);
  CHECK_THROWS_AS(class_pure_shard_size({1, 1}, 5), CapacityError);
}

TEST_CASE("shard partition label bound, completeness and determinism") {
  std::vector<int> y;
  const std::vector<std::size_t> per_class{130, 95, 120, 101, 99, 140, 88, 117, 105, 111};
  for (std::size_t c = 0; c < per_class.size(); ++c) y.insert(y.end(), per_class[c], static_cast<int>(c));
  const auto d = labelled(y, 10);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    PartitionPlan plan;
    plan.devices = 20;
    plan.classes_per_device = 2;
    plan.seed = seed;
    const auto r = partition(d, plan);
    std::vector<int> seen(d.rows(), 0);
    for (const auto& s : r.shards) {
      std::set<int> labels;
      for (auto rows : {&s.train_rows, &s.validation_rows, &s.test_rows})
        for (auto i : *rows) {
          labels.insert(d.labels[i]);
          ++seen[i];
        }
      CHECK(labels.size() <= 2);
      CHECK(s.n_train() == s.train_rows.size());
      CHECK(s.n_train() + s.n_validation() + s.n_test() == 2 * r.shard_size);
    }
    for (auto i : r.dropped) ++seen[i];
    CHECK(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));
  }
  PartitionPlan plan;
  plan.devices = 20;
  plan.seed = 9;
  const auto a = partition(d, plan), b = partition(d, plan);
  for (std::size_t m = 0; m < 20; ++m) {
    CHECK(a.shards[m].train_rows == b.shards[m].train_rows);
    CHECK(a.shards[m].test_rows == b.shards[m].test_rows);
  }
  CHECK(partition_audit_json(plan, a) == partition_audit_json(plan, b));
  plan.seed = 10;
  const auto c = partition(d, plan);
  bool differs = false;
  for (std::size_t m = 0; m < 20; ++m) differs |= a.shards[m].train_rows != c.shards[m].train_rows;
  CHECK(differs);

  // split contents follow the provenance rows
  reset_access_counts();
  const auto& tr = a.shards[3].train();
  CHECK(tr.labels[0] == d.labels[a.shards[3].train_rows[0]]);
  CHECK(tr.features.row(1) == d.features.row(static_cast<nn::Index>(a.shards[3].train_rows[1])));

  plan.devices = 2000;
  CHECK_THROWS_AS(partition(d, plan), CapacityError);
  plan.mode = PartitionMode::iid;
  CHECK_THROWS_AS(partition(d, plan), CapacityError);
}

TEST_CASE("privacy audit attribution") {
  const auto d = balanced(10, 2);
  PartitionPlan plan;
  plan.mode = PartitionMode::iid;
  plan.devices = 2;
  const auto r = partition(d, plan);
  reset_access_counts();
  (void)r.shards[0].n_train();
  CHECK(access_counts().server_reads == 0);
  (void)r.shards[0].train();
  CHECK(access_counts().server_reads == 1);
  {
    DeviceContext ctx(0);
    CHECK(in_device_context());
    (void)r.shards[0].test();
    {
      DeviceContext nested(1);
      (void)r.shards[1].train();
    }
    CHECK(in_device_context());
  }
  CHECK_FALSE(in_device_context());
  CHECK(access_counts().device_reads == 2);
  CHECK(access_counts().server_reads == 1);
}

TEST_CASE("rotate90") {
  Dataset d = labelled({4}, 5, 4);
  d.features << 1, 2, 3, 4;
  const auto r1 = rotate90(d, 1);
  CHECK(r1.features(0, 0) == 2);
  CHECK(r1.features(0, 1) == 4);
  CHECK(r1.features(0, 2) == 1);
  CHECK(r1.features(0, 3) == 3);
  CHECK(r1.labels == d.labels);

  // index-permutation oracle on a 5x5 image: (r, c) -> (n-1-c, r)
  Dataset big = labelled({0, 1}, 2, 25);
  const auto rot = rotate90(big, 1);
  for (int row = 0; row < 2; ++row)
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) CHECK(rot.features(row, (4 - c) * 5 + r) == big.features(row, r * 5 + c));

  CHECK(rotate90(big, 4).features == big.features);
  CHECK(rotate90(rotate90(big, 2), 2).features == big.features);
  CHECK(rotate90(big, -1).features == rotate90(big, 3).features);
  CHECK(rotate90(rotate90(big, 1), 3).features == big.features);
  std::vector<double> a(rot.features.data(), rot.features.data() + rot.features.size());
  std::vector<double> b(big.features.data(), big.features.data() + big.features.size());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
  CHECK_THROWS_AS(rotate90(labelled({0}, 1, 3), 1), ShapeError);
}

TEST_CASE("new device sampling") {
  const auto pool = balanced(50, 4, 16);
  const auto dev = make_new_device(pool, 120, 30, rotation(1), 5, 7);
  CHECK(dev.device_id() == 7);
  CHECK(dev.n_train() == 120);
  CHECK(dev.n_test() == 30);
  std::set<std::size_t> tr(dev.train_rows.begin(), dev.train_rows.end());
  CHECK(tr.size() == 120);
  for (auto i : dev.test_rows) CHECK(tr.count(i) == 0);
  const auto& train = dev.train();
  const auto expect = rotate90(subset(pool, dev.train_rows), 1);
  CHECK(train.features == expect.features);

  const auto plain = make_new_device(pool, 10, 5, Transform{}, 5);
  CHECK(plain.train().features == subset(pool, plain.train_rows).features);
  CHECK_THROWS_AS(make_new_device(pool, 190, 20, Transform{}, 1), CapacityError);

  const auto test_pool = balanced(5, 4, 16);
  const auto two = make_new_device(pool, 100, 20, rotation(1), 2);
  CHECK(two.n_train() == 100);
  const auto two_pools = make_new_device(pool, test_pool, 100, 20, Transform{}, 2);
  CHECK(two_pools.test().features == subset(test_pool, two_pools.test_rows).features);
  CHECK_THROWS_AS(make_new_device(pool, test_pool, 10, 21, Transform{}, 2), CapacityError);
}
