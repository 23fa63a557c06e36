#include "ally/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ally/error.hpp"
#include "ally/rng.hpp"

namespace ally {

LabeledSet Pool::labeled() const {
  return {features.select_rows(labeled_idx), labels.select(labeled_idx)};
}

void Pool::check_invariants() const {
  const std::size_t n = size();
  require(labels.size() == n, ErrorKind::contract, "pool: label count differs from row count");
  require(provenance.size() == n, ErrorKind::contract, "pool: provenance length mismatch");
  std::vector<char> seen(n, 0);
  for (std::size_t i : labeled_idx) {
    require(i < n, ErrorKind::contract, "pool: labeled index out of range");
    require(!seen[i], ErrorKind::contract, "pool: duplicate labeled index");
    seen[i] = 1;
  }
  for (std::size_t i : unlabeled_idx) {
    require(i < n, ErrorKind::contract, "pool: unlabeled index out of range");
    require(!seen[i], ErrorKind::contract, "pool: labeled and unlabeled sets overlap");
    seen[i] = 2;
  }
  if (test_features.rows() > 0)
    require(test_labels.size() == test_features.rows(), ErrorKind::contract,
            "pool: test labels missing");
}

Pool make_pool(Matrix features, Targets labels) {
  require(features.rows() == labels.size(), ErrorKind::shape,
          "pool: feature rows and label count differ");
  Pool p;
  p.unlabeled_idx.resize(features.rows());
  std::iota(p.unlabeled_idx.begin(), p.unlabeled_idx.end(), std::size_t{0});
  p.provenance = p.unlabeled_idx;
  p.features = std::move(features);
  p.test_labels.kind = labels.kind;
  p.labels = std::move(labels);
  return p;
}

Normalization parse_normalization(const std::string& name) {
  if (name == "none") return Normalization::none;
  if (name == "minmax") return Normalization::minmax;
  if (name == "zscore") return Normalization::zscore;
  fail(ErrorKind::config, "unknown normalization '" + name + "'");
}

Normalizer Normalizer::fit(const Matrix& m, Normalization kind) {
  Normalizer n;
  n.kind = kind;
  const std::size_t d = m.cols();
  n.offset.assign(d, 0.0);
  n.scale.assign(d, 1.0);
  if (kind == Normalization::none || m.rows() == 0) return n;
  const double rows = static_cast<double>(m.rows());
  for (std::size_t c = 0; c < d; ++c) {
    if (kind == Normalization::zscore) {
      double mean = 0.0;
      for (std::size_t r = 0; r < m.rows(); ++r) mean += m(r, c);
      mean /= rows;
      double var = 0.0;
      for (std::size_t r = 0; r < m.rows(); ++r) var += (m(r, c) - mean) * (m(r, c) - mean);
      var /= rows;
      // a constant column maps to exactly zero
      if (var <= variance_floor) {
        bool constant = true;
        for (std::size_t r = 1; r < m.rows() && constant; ++r) constant = m(r, c) == m(0, c);
        if (constant) mean = m(0, c);
      }
      n.offset[c] = mean;
      n.scale[c] = std::sqrt(std::max(var, variance_floor));
    } else {
      double lo = m(0, c), hi = m(0, c);
      for (std::size_t r = 0; r < m.rows(); ++r) {
        lo = std::min(lo, m(r, c));
        hi = std::max(hi, m(r, c));
      }
      n.offset[c] = lo;
      n.scale[c] = std::max(hi - lo, variance_floor);
    }
  }
  return n;
}

void Normalizer::apply(Matrix& m) const {
  if (kind == Normalization::none || m.rows() == 0) return;
  require(m.cols() == offset.size(), ErrorKind::shape, "normalizer: column count mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = (m(r, c) - offset[c]) / scale[c];
}

void normalize_pool(Pool& pool, Normalization kind, bool targets) {
  const auto fx = Normalizer::fit(pool.features, kind);
  fx.apply(pool.features);
  fx.apply(pool.test_features);
  if (targets && pool.labels.kind == LossKind::mse) {
    const auto fy = Normalizer::fit(pool.labels.values, Normalization::zscore);
    fy.apply(pool.labels.values);
    fy.apply(pool.test_labels.values);
  }
}

// ---------------------------------------------------------------- IDX

namespace {

class ByteReader {
 public:
  ByteReader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path_);
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes_[pos_++]);
    return v;
  }

  const char* take(std::size_t n) {
    need(n);
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::size_t offset() const noexcept { return pos_; }
  const std::string& path() const noexcept { return path_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      fail(ErrorKind::parse, path_ + ": truncated at byte offset " + std::to_string(pos_) +
                                 " (need " + std::to_string(n) + " more bytes, have " +
                                 std::to_string(bytes_.size() - pos_) + ")");
  }

  std::string path_;
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

void put_u32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

Pool load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  ByteReader img(images);
  const std::uint32_t magic_i = img.u32();
  if (magic_i != 0x00000803u)
    fail(ErrorKind::parse, img.path() + ": bad image magic at byte offset 0");
  const std::uint32_t n = img.u32(), rows = img.u32(), cols = img.u32();
  const std::size_t d = static_cast<std::size_t>(rows) * cols;

  ByteReader lab(labels);
  const std::uint32_t magic_l = lab.u32();
  if (magic_l != 0x00000801u)
    fail(ErrorKind::parse, lab.path() + ": bad label magic at byte offset 0");
  const std::uint32_t n_labels = lab.u32();
  if (n_labels != n)
    fail(ErrorKind::parse, lab.path() + ": label count " + std::to_string(n_labels) +
                               " at byte offset 4 differs from image count " + std::to_string(n));

  const char* pix = img.take(static_cast<std::size_t>(n) * d);
  const char* lb = lab.take(n);
  Matrix x(n, d);
  auto data = x.data();
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = static_cast<double>(static_cast<unsigned char>(pix[i])) / 255.0;
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<unsigned char>(lb[i]);
  return make_pool(std::move(x), Targets::classification(std::move(y)));
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const Matrix& features, const std::vector<int>& classes, std::size_t img_rows,
               std::size_t img_cols) {
  require(img_rows * img_cols == features.cols(), ErrorKind::shape,
          "write_idx: image shape does not match feature width");
  require(classes.size() == features.rows(), ErrorKind::shape, "write_idx: label count mismatch");
  std::ofstream img(images, std::ios::binary);
  require(static_cast<bool>(img), ErrorKind::io, "cannot write " + images.string());
  put_u32(img, 0x00000803u);
  put_u32(img, static_cast<std::uint32_t>(features.rows()));
  put_u32(img, static_cast<std::uint32_t>(img_rows));
  put_u32(img, static_cast<std::uint32_t>(img_cols));
  std::vector<char> buf(features.size());
  auto data = features.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = std::clamp(data[i], 0.0, 1.0);
    buf[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  img.write(buf.data(), static_cast<std::streamsize>(buf.size()));

  std::ofstream lab(labels, std::ios::binary);
  require(static_cast<bool>(lab), ErrorKind::io, "cannot write " + labels.string());
  put_u32(lab, 0x00000801u);
  put_u32(lab, static_cast<std::uint32_t>(classes.size()));
  for (int c : classes) {
    require(c >= 0 && c < 256, ErrorKind::input, "write_idx: label does not fit in a byte");
    lab.put(static_cast<char>(c));
  }
  require(static_cast<bool>(img) && static_cast<bool>(lab), ErrorKind::io, "write_idx: write failed");
}

// ---------------------------------------------------------------- CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r\"");
    const auto e = cell.find_last_not_of(" \t\r\"");
    cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

Pool load_csv(const std::filesystem::path& path, const std::vector<std::string>& target_columns,
              const std::vector<std::string>& feature_columns, Normalization normalization) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::parse,
          path.string() + ": missing header row");
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    require(it != header.end(), ErrorKind::input,
            path.string() + ": no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  require(!target_columns.empty(), ErrorKind::input, "load_csv: no target columns given");
  std::vector<std::size_t> tcols, fcols;
  for (const auto& t : target_columns) tcols.push_back(column(t));
  if (feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (std::find(tcols.begin(), tcols.end(), c) == tcols.end()) fcols.push_back(c);
  } else {
    for (const auto& f : feature_columns) fcols.push_back(column(f));
  }
  require(!fcols.empty(), ErrorKind::input, "load_csv: no feature columns");

  std::vector<double> xs, ys;
  std::size_t rows = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == header.size(), ErrorKind::parse,
            path.string() + ": row " + std::to_string(line_no) + " has " +
                std::to_string(cells.size()) + " cells, header has " +
                std::to_string(header.size()));
    auto number = [&](std::size_t c) {
      const auto& s = cells[c];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
        fail(ErrorKind::parse, path.string() + ": non-numeric cell '" + s + "' at row " +
                                   std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                                   " (" + header[c] + ")");
      return v;
    };
    for (std::size_t c : fcols) xs.push_back(number(c));
    for (std::size_t c : tcols) ys.push_back(number(c));
    ++rows;
  }
  require(rows > 0, ErrorKind::parse, path.string() + ": no data rows");
  Pool pool = make_pool(Matrix(rows, fcols.size(), std::move(xs)),
                        Targets::regression(Matrix(rows, tcols.size(), std::move(ys))));
  pool.test_labels = Targets::regression(Matrix(0, tcols.size()));
  pool.test_features = Matrix(0, fcols.size());
  normalize_pool(pool, normalization, normalization != Normalization::none);
  return pool;
}

// ---------------------------------------------------------------- synthetic

Matrix blob_centers(std::size_t n_classes, std::size_t dim, double separation) {
  Matrix c(n_classes, dim);
  if (dim == 1 || n_classes <= 2) {
    for (std::size_t k = 0; k < n_classes; ++k) c(k, 0) = separation * static_cast<double>(k);
    return c;
  }
  const double radius = separation / (2.0 * std::sin(std::numbers::pi / static_cast<double>(n_classes)));
  for (std::size_t k = 0; k < n_classes; ++k) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_classes);
    c(k, 0) = radius * std::cos(a);
    c(k, 1) = radius * std::sin(a);
  }
  return c;
}

Pool synth_blobs(const BlobsSpec& spec) {
  require(spec.n_per_class >= 1 && spec.n_classes >= 1 && spec.dim >= 1, ErrorKind::input,
          "synth_blobs: counts must be >= 1");
  require(spec.spread >= 0.0, ErrorKind::input, "synth_blobs: spread must be >= 0");
  const Matrix centers = blob_centers(spec.n_classes, spec.dim, spec.separation);
  Rng rng(derive_seed(spec.seed, 0xb10bULL));
  auto draw = [&](std::size_t per_class, Matrix& x, std::vector<int>& y) {
    const std::size_t n = per_class * spec.n_classes;
    x = Matrix(n, spec.dim);
    y.resize(n);
    // interleave classes so that row order carries no class structure
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = i % spec.n_classes;
      y[i] = static_cast<int>(k);
      for (std::size_t j = 0; j < spec.dim; ++j)
        x(i, j) = centers(k, j) + spec.spread * standard_normal(rng);
    }
  };
  Matrix x, tx;
  std::vector<int> y, ty;
  draw(spec.n_per_class, x, y);
  draw(spec.test_per_class, tx, ty);
  Pool pool = make_pool(std::move(x), Targets::classification(std::move(y)));
  pool.test_features = std::move(tx);
  pool.test_labels = Targets::classification(std::move(ty));
  return pool;
}

Pool synth_regression(const RegressionSpec& spec) {
  require(spec.n >= 1 && spec.dim >= 1, ErrorKind::input, "synth_regression: counts must be >= 1");
  Rng rng(derive_seed(spec.seed, 0x4e94ULL));
  std::vector<double> w(spec.dim);
  for (double& v : w) v = standard_normal(rng);
  auto draw = [&](std::size_t n, Matrix& x, Matrix& y) {
    x = Matrix(n, spec.dim);
    y = Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      double t = 0.0;
      for (std::size_t j = 0; j < spec.dim; ++j) {
        x(i, j) = 2.0 * uniform01(rng) - 1.0;
        t += w[j] * x(i, j);
      }
      y(i, 0) = t + 0.5 * std::sin(3.0 * x(i, 0)) + spec.noise * standard_normal(rng);
    }
  };
  Matrix x, y, tx, ty;
  draw(spec.n, x, y);
  draw(spec.n_test, tx, ty);
  Pool pool = make_pool(std::move(x), Targets::regression(std::move(y)));
  pool.test_features = std::move(tx);
  pool.test_labels = Targets::regression(std::move(ty));
  return pool;
}

// ---------------------------------------------------------------- transforms

Pool clone_redundant(const Pool& pool, std::size_t factor) {
  require(factor >= 1, ErrorKind::input, "clone_redundant: factor must be >= 1");
  if (factor == 1) return pool;
  const std::size_t n = pool.size();
  std::vector<std::size_t> src(n * factor);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < factor; ++c) src[i * factor + c] = i;
  Pool out;
  out.features = pool.features.select_rows(src);
  out.labels = pool.labels.select(src);
  out.provenance.resize(src.size());
  for (std::size_t r = 0; r < src.size(); ++r) out.provenance[r] = pool.provenance[src[r]];
  std::vector<char> is_labeled(n, 0);
  for (std::size_t i : pool.labeled_idx) is_labeled[i] = 1;
  for (std::size_t i : pool.labeled_idx) out.labeled_idx.push_back(i * factor);
  std::sort(out.labeled_idx.begin(), out.labeled_idx.end());
  std::vector<char> is_unlabeled(n, 0);
  for (std::size_t i : pool.unlabeled_idx) is_unlabeled[i] = 1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < factor; ++c)
      if (is_unlabeled[i] || (is_labeled[i] && c > 0)) out.unlabeled_idx.push_back(i * factor + c);
  out.test_features = pool.test_features;
  out.test_labels = pool.test_labels;
  return out;
}

Pool split_initial(const Pool& pool, std::size_t n_initial, std::uint64_t seed) {
  require(n_initial <= pool.size(), ErrorKind::input,
          "split_initial: n_initial " + std::to_string(n_initial) + " exceeds pool size " +
              std::to_string(pool.size()));
  Rng rng(derive_seed(seed, 0x1417ULL));
  const auto perm = permutation(pool.size(), rng);
  Pool out = pool;
  out.labeled_idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_initial));
  out.unlabeled_idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_initial), perm.end());
  std::sort(out.labeled_idx.begin(), out.labeled_idx.end());
  std::sort(out.unlabeled_idx.begin(), out.unlabeled_idx.end());
  return out;
}

Pool move_to_labeled(const Pool& pool, const std::vector<std::size_t>& unlabeled_positions) {
  std::vector<char> move(pool.unlabeled_idx.size(), 0);
  for (std::size_t p : unlabeled_positions) {
    require(p < move.size(), ErrorKind::input, "move_to_labeled: position out of range");
    require(!move[p], ErrorKind::input, "move_to_labeled: duplicate position");
    move[p] = 1;
  }
  Pool out = pool;
  out.unlabeled_idx.clear();
  for (std::size_t p = 0; p < move.size(); ++p) {
    if (move[p])
      out.labeled_idx.push_back(pool.unlabeled_idx[p]);
    else
      out.unlabeled_idx.push_back(pool.unlabeled_idx[p]);
  }
  std::sort(out.labeled_idx.begin(), out.labeled_idx.end());
  return out;
}

Pool carve_test_split(const Pool& pool, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0, ErrorKind::input,
          "carve_test_split: fraction must lie in (0, 1)");
  require(pool.labeled_idx.empty(), ErrorKind::input,
          "carve_test_split: pool must not be split into labeled/unlabeled yet");
  const std::size_t n_test =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(pool.size()))));
  Rng rng(derive_seed(seed, 0x7e57ULL));
  auto perm = permutation(pool.size(), rng);
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> keep(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(test.begin(), test.end());
  std::sort(keep.begin(), keep.end());
  Pool out = make_pool(pool.features.select_rows(keep), pool.labels.select(keep));
  out.test_features = vstack(pool.test_features, pool.features.select_rows(test));
  out.test_labels = pool.test_labels.size() > 0 ? pool.test_labels.concat(pool.labels.select(test))
                                                : pool.labels.select(test);
  return out;
}

}  // namespace ally
