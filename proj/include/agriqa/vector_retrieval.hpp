#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace agriqa::retrieval {

inline constexpr std::size_t kDefaultDimension = 4096;
inline constexpr std::size_t kDefaultChunkSize = 256;
inline constexpr std::size_t kDefaultOverlap = 32;
inline constexpr double kDefaultMinScore = 0.1;

struct DocumentChunk {
  std::string doc_id;
  std::size_t chunk_id = 0;
  std::string text;
  std::string source;
  std::size_t token_count = 0;
};

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
};

/// Sorted (bucket, weight) pairs; the index's internal representation.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

struct RetrievalHit {
  DocumentChunk chunk;
  double score = 0.0;
};

/// Splits `text` into whitespace-token windows of `chunk_size` with stride
/// `chunk_size - overlap`. Throws Error(InvalidInput) unless
/// 0 <= overlap < chunk_size.
std::vector<DocumentChunk> chunk_document(const std::string& doc_id, std::string_view text,
                                          std::size_t chunk_size = kDefaultChunkSize,
                                          std::size_t overlap = kDefaultOverlap,
                                          const std::string& source = {});

/// Terms used by the embedder: lowercase alphanumeric runs.
std::vector<std::string> embedding_terms(std::string_view text);

/// FNV-1a 64-bit.
std::uint64_t fnv1a(std::string_view s);

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Hashed bag-of-words embedder with TF-IDF weights from a document-frequency
/// table. Immutable once built.
class TfIdfEmbedder {
 public:
  explicit TfIdfEmbedder(std::size_t dimension = kDefaultDimension) : dimension_(dimension) {}

  /// Builds document frequencies from the given texts.
  static TfIdfEmbedder fit(const std::vector<std::string_view>& texts,
                           std::size_t dimension = kDefaultDimension);

  std::size_t dimension() const { return dimension_; }
  std::size_t document_count() const { return doc_count_; }
  double idf(const std::string& term) const;

  SparseVector embed_sparse(std::string_view text) const;
  EmbeddingVector embed(std::string_view text) const;

 private:
  std::size_t dimension_;
  std::size_t doc_count_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
};

/// Flat exact cosine index. Reads are concurrent; add() takes exclusive
/// access and publishes a fully rebuilt snapshot.
class VectorIndex {
 public:
  explicit VectorIndex(std::size_t dimension = kDefaultDimension);
  VectorIndex(VectorIndex&& other) noexcept;
  VectorIndex& operator=(VectorIndex&& other) noexcept;
  VectorIndex(const VectorIndex&) = delete;
  VectorIndex& operator=(const VectorIndex&) = delete;

  /// Adds or replaces chunks, then recomputes IDF and all embeddings.
  /// Throws Error(InvalidInput) on duplicate keys within the batch.
  std::size_t add(const std::vector<DocumentChunk>& chunks);

  std::vector<RetrievalHit> search(std::string_view query, std::size_t k,
                                   double min_score = kDefaultMinScore) const;

  EmbeddingVector embed(std::string_view text) const;

  std::size_t size() const;
  std::size_t dimension() const { return dimension_; }
  std::vector<DocumentChunk> chunks() const;

  /// Writes vectors.f32, chunks.tsv and texts.bin under `dir`. Throws
  /// Error(StorageError).
  void save(const std::string& dir) const;
  static VectorIndex load(const std::string& dir);

  /// Ingests *.txt / *.md files below `dir`; doc_id is the relative path
  /// without extension. Returns the number of chunks added.
  std::size_t ingest_directory(const std::string& dir, std::size_t chunk_size = kDefaultChunkSize,
                               std::size_t overlap = kDefaultOverlap);

 private:
  struct Snapshot {
    std::vector<DocumentChunk> chunks;
    std::vector<SparseVector> vectors;
    TfIdfEmbedder embedder;
  };

  std::size_t dimension_;
  mutable std::shared_mutex mu_;
  std::shared_ptr<const Snapshot> snapshot_;
};

/// Rank-ordered chunk texts, each preceded by a "[i] source#chunk" line,
/// keeping only whole chunks whose summed token_count fits `budget`.
std::string assemble_context(const std::vector<RetrievalHit>& hits, std::size_t budget);

std::string citation(const DocumentChunk& chunk);

}  // namespace agriqa::retrieval
