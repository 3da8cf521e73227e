#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "topicshift/rng.hpp"

namespace topicshift {

// Token embeddings E (rows e_k) and tied classifier heads C (rows c_k) with
// c_y . e_y = 1 and c_y . e_k = 0 for k != y.
template <typename Scalar>
struct VocabularyT {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix embeddings;  // K x d
  Matrix heads;       // K x d

  int token_count() const { return static_cast<int>(embeddings.rows()); }
  int dim() const { return static_cast<int>(embeddings.cols()); }

  // Max deviation of C E^T from the identity.
  Scalar tying_error() const {
    Matrix g = heads * embeddings.transpose();
    g.diagonal().array() -= Scalar(1);
    return g.cwiseAbs().maxCoeff();
  }
};

using Vocabulary = VocabularyT<double>;

// Orthonormalizes K seeded Gaussian rows (QR) and ties C = E. Row signs are
// fixed so the first non-negligible entry of each row is positive, making the
// construction independent of QR sign conventions (and (K=1,d=1) -> +1).
template <typename Scalar = double>
VocabularyT<Scalar> build_orthonormal_vocab(int token_count, int dim, std::uint64_t seed) {
  if (token_count < 1) throw std::invalid_argument("build_orthonormal_vocab: empty vocabulary");
  if (token_count > dim)
    throw std::invalid_argument("build_orthonormal_vocab: token count exceeds dimension");

  using Matrix = typename VocabularyT<Scalar>::Matrix;
  Rng rng(seed);
  Matrix gauss(dim, token_count);
  for (int j = 0; j < token_count; ++j)
    for (int i = 0; i < dim; ++i) gauss(i, j) = static_cast<Scalar>(rng.next_gaussian());

  Eigen::HouseholderQR<Matrix> qr(gauss);
  Matrix q = qr.householderQ() * Matrix::Identity(dim, token_count);

  VocabularyT<Scalar> v;
  v.embeddings = q.transpose();
  for (int k = 0; k < token_count; ++k) {
    for (int j = 0; j < dim; ++j) {
      if (std::abs(v.embeddings(k, j)) > Scalar(1e-9)) {
        if (v.embeddings(k, j) < Scalar(0)) v.embeddings.row(k) = -v.embeddings.row(k);
        break;
      }
    }
  }
  v.heads = v.embeddings;
  return v;
}

// Plain text matrix file: "K d" header, then K rows of E and K rows of C.
inline void save_vocabulary(const Vocabulary& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_vocabulary: cannot open " + path);
  out.precision(17);
  out << v.token_count() << ' ' << v.dim() << '\n';
  for (const auto* m : {&v.embeddings, &v.heads}) {
    for (int i = 0; i < m->rows(); ++i) {
      for (int j = 0; j < m->cols(); ++j) out << (j ? " " : "") << (*m)(i, j);
      out << '\n';
    }
  }
}

inline Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_vocabulary: cannot open " + path);
  int k = 0, d = 0;
  if (!(in >> k >> d) || k < 1 || d < 1)
    throw std::runtime_error("load_vocabulary: bad header in " + path);
  Vocabulary v;
  v.embeddings.resize(k, d);
  v.heads.resize(k, d);
  for (auto* m : {&v.embeddings, &v.heads})
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < d; ++j)
        if (!(in >> (*m)(i, j))) throw std::runtime_error("load_vocabulary: truncated " + path);
  return v;
}

}  // namespace topicshift
