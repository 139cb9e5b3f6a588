#pragma once

// Embedding-based metrics: pairwise cosine similarity, greedy-matching
// BERTScore, and the Fréchet distance between Gaussian summaries of two
// embedding sets. Embeddings come from an external provider (see
// provider.hpp); all math here is pure.

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icd/error.hpp"
#include "icd/linalg.hpp"
#include "icd/text.hpp"

namespace icd {

using EmbeddingVector = std::vector<double>;

// Per-token contextual embeddings for one sentence, in token order. The
// token segmentation is the provider's own and may differ from tokenize().
struct TokenEmbeddings {
  std::vector<std::string> tokens;
  std::vector<EmbeddingVector> vectors;
};

inline double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.size() != v.size()) throw EvaluationError("cosine_similarity: dimension mismatch");
  if (u.empty()) throw EvaluationError("cosine_similarity: empty vector");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw EvaluationError("cosine_similarity: zero vector");
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

// 100 * mean cosine similarity over unordered pairs. Lower = more diverse.
inline double self_cos_sim(std::span<const EmbeddingVector> embeddings) {
  if (embeddings.size() < 2) throw EvaluationError("self_cos_sim: need at least 2 embeddings");
  double sum = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < embeddings.size(); ++i) {
    for (size_t j = i + 1; j < embeddings.size(); ++j) {
      sum += cosine_similarity(embeddings[i], embeddings[j]);
      ++pairs;
    }
  }
  return 100.0 * sum / static_cast<double>(pairs);
}

inline double self_cos_sim(const std::vector<EmbeddingVector>& embeddings) {
  return self_cos_sim(std::span<const EmbeddingVector>(embeddings));
}

struct BertScoreConfig {
  bool use_idf = false;
  // token -> idf weight; tokens missing from the table weigh 1.0.
  std::map<std::string, double> idf;
  // Affine rescale (x - baseline) / (1 - baseline) applied to the F1 in
  // [0,1] space when set.
  std::optional<double> baseline;
};

// Greedy-matching BERTScore F1 on a 0..100 scale.
inline double bertscore_f1(const TokenEmbeddings& hyp, const TokenEmbeddings& ref,
                           const BertScoreConfig& config = {}) {
  if (hyp.vectors.empty() || ref.vectors.empty()) {
    throw EvaluationError("bertscore_f1: empty token embedding list");
  }
  auto idf_weight = [&](const std::vector<std::string>& toks, size_t i) {
    if (!config.use_idf) return 1.0;
    if (i < toks.size()) {
      auto it = config.idf.find(toks[i]);
      if (it != config.idf.end()) return it->second;
    }
    return 1.0;
  };
  auto directed = [&](const TokenEmbeddings& from, const TokenEmbeddings& to) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < from.vectors.size(); ++i) {
      double best = -1.0;
      for (const auto& v : to.vectors) best = std::max(best, cosine_similarity(from.vectors[i], v));
      double w = idf_weight(from.tokens, i);
      num += w * best;
      den += w;
    }
    return den > 0.0 ? num / den : 0.0;
  };
  double precision = directed(hyp, ref);
  double recall = directed(ref, hyp);
  double f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  if (config.baseline) {
    f1 = (f1 - *config.baseline) / (1.0 - *config.baseline);
  }
  return 100.0 * f1;
}

// Mean BERTScore F1 over all unordered pairs of the set.
inline double self_bertscore(std::span<const TokenEmbeddings> set, const BertScoreConfig& config = {}) {
  if (set.size() < 2) throw EvaluationError("self_bertscore: need at least 2 members");
  double sum = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < set.size(); ++i) {
    for (size_t j = i + 1; j < set.size(); ++j) {
      sum += bertscore_f1(set[i], set[j], config);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

inline double self_bertscore(const std::vector<TokenEmbeddings>& set, const BertScoreConfig& config = {}) {
  return self_bertscore(std::span<const TokenEmbeddings>(set), config);
}

// Mean vector and covariance matrix of an embedding set.
struct GaussianSummary {
  EmbeddingVector mu;
  Matrix sigma;
};

inline constexpr double kGaussianJitter = 1e-6;

// Sample mean and unbiased covariance (divisor n-1), with an epsilon*I
// jitter whenever the smallest eigenvalue falls below epsilon.
inline GaussianSummary fit_gaussian(std::span<const EmbeddingVector> embeddings) {
  if (embeddings.size() < 2) throw EvaluationError("fit_gaussian: need at least 2 embeddings");
  const size_t n = embeddings.size();
  const size_t d = embeddings[0].size();
  for (const auto& e : embeddings) {
    if (e.size() != d) throw EvaluationError("fit_gaussian: inconsistent dimensions");
  }

  GaussianSummary g;
  g.mu.assign(d, 0.0);
  for (const auto& e : embeddings)
    for (size_t i = 0; i < d; ++i) g.mu[i] += e[i];
  for (size_t i = 0; i < d; ++i) g.mu[i] /= static_cast<double>(n);

  g.sigma = Matrix(d, d);
  for (const auto& e : embeddings) {
    for (size_t i = 0; i < d; ++i) {
      double di = e[i] - g.mu[i];
      for (size_t j = i; j < d; ++j) {
        g.sigma(i, j) += di * (e[j] - g.mu[j]);
      }
    }
  }
  for (size_t i = 0; i < d; ++i) {
    for (size_t j = i; j < d; ++j) {
      double v = g.sigma(i, j) / static_cast<double>(n - 1);
      g.sigma(i, j) = v;
      g.sigma(j, i) = v;
    }
  }

  double min_eig = sym_eigen(g.sigma).values.front();
  if (min_eig < kGaussianJitter) {
    for (size_t i = 0; i < d; ++i) g.sigma(i, i) += kGaussianJitter;
  }
  return g;
}

inline GaussianSummary fit_gaussian(const std::vector<EmbeddingVector>& embeddings) {
  return fit_gaussian(std::span<const EmbeddingVector>(embeddings));
}

// Squared 2-Wasserstein distance between two Gaussians:
//   |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a^{1/2} S_b S_a^{1/2})^{1/2}).
// The symmetrized product keeps the inner matrix PSD; round-off negatives
// are clamped to zero.
inline double frechet_distance(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.mu.size() != b.mu.size()) throw EvaluationError("frechet_distance: dimension mismatch");
  double mean_term = 0.0;
  for (size_t i = 0; i < a.mu.size(); ++i) {
    double d = a.mu[i] - b.mu[i];
    mean_term += d * d;
  }
  Matrix sqrt_a = matrix_sqrt_psd(a.sigma);
  Matrix inner = sqrt_a * b.sigma * sqrt_a;
  inner.symmetrize();
  Matrix cross = matrix_sqrt_psd(inner);
  double value = mean_term + a.sigma.trace() + b.sigma.trace() - 2.0 * cross.trace();
  return value < 0.0 ? 0.0 : value;
}

// Fréchet distance between the Gaussian summaries of reference and
// generation sets, with embeddings pulled from the provider's pooler
// endpoint. Provider must expose
//   embed_sentences(const std::vector<std::string>&, EmbeddingKind).
template <class Provider>
double fbd(std::span<const Sentence> references, std::span<const Sentence> generations,
           Provider& provider) {
  if (references.size() < 2 || generations.size() < 2) {
    throw EvaluationError("fbd: both sets need at least 2 sentences");
  }
  auto texts = [](std::span<const Sentence> set) {
    std::vector<std::string> out;
    out.reserve(set.size());
    for (const auto& s : set) out.push_back(s.raw);
    return out;
  };
  auto ref_emb = provider.embed_pooler(texts(references));
  auto gen_emb = provider.embed_pooler(texts(generations));
  return frechet_distance(fit_gaussian(ref_emb), fit_gaussian(gen_emb));
}

}  // namespace icd
