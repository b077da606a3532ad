#include "agriqa/vector_retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>

#include "agriqa/error.hpp"
#include "agriqa/text.hpp"

namespace agriqa::retrieval {

namespace fs = std::filesystem;

namespace {

bool hit_before(const RetrievalHit& a, const RetrievalHit& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.chunk.doc_id != b.chunk.doc_id) return a.chunk.doc_id < b.chunk.doc_id;
  return a.chunk.chunk_id < b.chunk.chunk_id;
}

double sparse_dot(const SparseVector& a, const SparseVector& b) {
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      sum += a[i].second * b[j].second;
      ++i;
      ++j;
    }
  }
  return sum;
}

void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void check_field(const std::string& value, const char* what) {
  if (value.find_first_of("\t\n\r") != std::string::npos) {
    throw Error(ErrorCode::StorageError, std::string(what) + " contains a tab or newline: " + value);
  }
}

}  // namespace

std::vector<DocumentChunk> chunk_document(const std::string& doc_id, std::string_view text,
                                          std::size_t chunk_size, std::size_t overlap,
                                          const std::string& source) {
  if (chunk_size == 0 || overlap >= chunk_size) {
    throw Error(ErrorCode::InvalidInput, "chunking requires 0 <= overlap < chunk_size");
  }
  auto tokens = text::split_whitespace(text);
  std::vector<DocumentChunk> chunks;
  const std::size_t stride = chunk_size - overlap;
  for (std::size_t start = 0; start < tokens.size(); start += stride) {
    std::size_t end = std::min(start + chunk_size, tokens.size());
    DocumentChunk c;
    c.doc_id = doc_id;
    c.chunk_id = chunks.size();
    c.source = source.empty() ? doc_id : source;
    c.token_count = end - start;
    std::vector<std::string> span(tokens.begin() + static_cast<long>(start),
                                  tokens.begin() + static_cast<long>(end));
    c.text = text::join(span, " ");
    chunks.push_back(std::move(c));
    if (end == tokens.size()) break;
  }
  return chunks;
}

std::vector<std::string> embedding_terms(std::string_view text) { return text::word_tokens(text); }

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) {
    throw Error(ErrorCode::InvalidInput, "cosine of vectors with different dimensions");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

TfIdfEmbedder TfIdfEmbedder::fit(const std::vector<std::string_view>& texts, std::size_t dimension) {
  TfIdfEmbedder e(dimension);
  e.doc_count_ = texts.size();
  for (auto t : texts) {
    auto terms = embedding_terms(t);
    std::set<std::string> unique(terms.begin(), terms.end());
    for (const auto& term : unique) ++e.df_[term];
  }
  return e;
}

double TfIdfEmbedder::idf(const std::string& term) const {
  auto it = df_.find(term);
  double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((1.0 + static_cast<double>(doc_count_)) / (1.0 + df)) + 1.0;
}

SparseVector TfIdfEmbedder::embed_sparse(std::string_view text) const {
  std::map<std::string, std::size_t> tf;
  for (auto& term : embedding_terms(text)) ++tf[term];

  std::map<std::uint32_t, double> buckets;
  for (const auto& [term, count] : tf) {
    auto bucket = static_cast<std::uint32_t>(fnv1a(term) % dimension_);
    buckets[bucket] += static_cast<double>(count) * idf(term);
  }
  double norm2 = 0.0;
  for (const auto& [_, w] : buckets) norm2 += w * w;
  SparseVector out;
  if (norm2 == 0.0) return out;
  const double norm = std::sqrt(norm2);
  out.reserve(buckets.size());
  for (const auto& [b, w] : buckets) out.emplace_back(b, w / norm);
  return out;
}

EmbeddingVector TfIdfEmbedder::embed(std::string_view text) const {
  EmbeddingVector v;
  v.values.assign(dimension_, 0.0);
  for (const auto& [b, w] : embed_sparse(text)) v.values[b] = w;
  return v;
}

VectorIndex::VectorIndex(std::size_t dimension)
    : dimension_(dimension), snapshot_(std::make_shared<Snapshot>(Snapshot{{}, {}, TfIdfEmbedder(dimension)})) {
  if (dimension == 0) throw Error(ErrorCode::InvalidInput, "embedding dimension must be positive");
}

VectorIndex::VectorIndex(VectorIndex&& other) noexcept : dimension_(other.dimension_) {
  std::unique_lock lock(other.mu_);
  snapshot_ = std::move(other.snapshot_);
  other.snapshot_ = std::make_shared<Snapshot>(Snapshot{{}, {}, TfIdfEmbedder(other.dimension_)});
}

VectorIndex& VectorIndex::operator=(VectorIndex&& other) noexcept {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  dimension_ = other.dimension_;
  snapshot_ = std::move(other.snapshot_);
  other.snapshot_ = std::make_shared<Snapshot>(Snapshot{{}, {}, TfIdfEmbedder(other.dimension_)});
  return *this;
}

std::size_t VectorIndex::add(const std::vector<DocumentChunk>& chunks) {
  std::set<std::pair<std::string, std::size_t>> batch_keys;
  for (const auto& c : chunks) {
    if (!batch_keys.emplace(c.doc_id, c.chunk_id).second) {
      throw Error(ErrorCode::InvalidInput,
                  "duplicate chunk key in batch: " + c.doc_id + "#" + std::to_string(c.chunk_id));
    }
  }

  std::unique_lock lock(mu_);
  auto next = std::make_shared<Snapshot>(Snapshot{{}, {}, TfIdfEmbedder(dimension_)});
  next->chunks.reserve(snapshot_->chunks.size() + chunks.size());
  for (const auto& c : snapshot_->chunks) {
    if (batch_keys.count({c.doc_id, c.chunk_id}) == 0) next->chunks.push_back(c);
  }
  next->chunks.insert(next->chunks.end(), chunks.begin(), chunks.end());

  std::vector<std::string_view> texts;
  texts.reserve(next->chunks.size());
  for (const auto& c : next->chunks) texts.emplace_back(c.text);
  next->embedder = TfIdfEmbedder::fit(texts, dimension_);
  next->vectors.reserve(next->chunks.size());
  for (const auto& c : next->chunks) next->vectors.push_back(next->embedder.embed_sparse(c.text));

  snapshot_ = std::move(next);
  return chunks.size();
}

std::vector<RetrievalHit> VectorIndex::search(std::string_view query, std::size_t k,
                                              double min_score) const {
  std::shared_ptr<const Snapshot> snap;
  {
    std::shared_lock lock(mu_);
    snap = snapshot_;
  }
  std::vector<RetrievalHit> hits;
  if (k == 0 || snap->chunks.empty()) return hits;
  const auto q = snap->embedder.embed_sparse(query);
  for (std::size_t i = 0; i < snap->chunks.size(); ++i) {
    double s = sparse_dot(q, snap->vectors[i]);
    if (s >= min_score) hits.push_back({snap->chunks[i], s});
  }
  std::sort(hits.begin(), hits.end(), hit_before);
  if (hits.size() > k) hits.resize(k);
  return hits;
}

EmbeddingVector VectorIndex::embed(std::string_view text) const {
  std::shared_lock lock(mu_);
  return snapshot_->embedder.embed(text);
}

std::size_t VectorIndex::size() const {
  std::shared_lock lock(mu_);
  return snapshot_->chunks.size();
}

std::vector<DocumentChunk> VectorIndex::chunks() const {
  std::shared_lock lock(mu_);
  return snapshot_->chunks;
}

void VectorIndex::save(const std::string& dir) const {
  std::shared_ptr<const Snapshot> snap;
  {
    std::shared_lock lock(mu_);
    snap = snapshot_;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::StorageError, "cannot create " + dir + ": " + ec.message());

  std::string meta = "#dimension\t" + std::to_string(dimension_) + "\n";
  std::string texts;
  std::string vectors;
  vectors.reserve(snap->chunks.size() * dimension_ * 4);
  for (std::size_t i = 0; i < snap->chunks.size(); ++i) {
    const auto& c = snap->chunks[i];
    check_field(c.doc_id, "doc_id");
    check_field(c.source, "source");
    meta += c.doc_id + "\t" + std::to_string(c.chunk_id) + "\t" + c.source + "\t" +
            std::to_string(texts.size()) + "\t" + std::to_string(c.text.size()) + "\t" +
            std::to_string(c.token_count) + "\n";
    texts += c.text;

    std::vector<float> row(dimension_, 0.0f);
    for (const auto& [b, w] : snap->vectors[i]) row[b] = static_cast<float>(w);
    for (float f : row) put_u32le(vectors, std::bit_cast<std::uint32_t>(f));
  }
  const fs::path base(dir);
  text::write_file((base / "chunks.tsv").string(), meta);
  text::write_file((base / "texts.bin").string(), texts);
  text::write_file((base / "vectors.f32").string(), vectors);
}

VectorIndex VectorIndex::load(const std::string& dir) {
  const fs::path base(dir);
  auto lines = text::read_lines((base / "chunks.tsv").string());
  auto texts = text::read_file((base / "texts.bin").string());
  auto vectors = text::read_file((base / "vectors.f32").string());
  if (lines.empty() || lines[0].rfind("#dimension\t", 0) != 0) {
    throw Error(ErrorCode::StorageError, "chunks.tsv: missing dimension header");
  }
  std::size_t dimension = 0;
  try {
    dimension = std::stoul(lines[0].substr(11));
  } catch (const std::exception&) {
    throw Error(ErrorCode::StorageError, "chunks.tsv: bad dimension header");
  }

  std::vector<DocumentChunk> chunks;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = text::split(lines[i], '\t');
    if (f.size() != 6) throw Error(ErrorCode::StorageError, "chunks.tsv line " + std::to_string(i + 1));
    DocumentChunk c;
    std::size_t offset = 0, length = 0;
    try {
      c.doc_id = f[0];
      c.chunk_id = std::stoul(f[1]);
      c.source = f[2];
      offset = std::stoul(f[3]);
      length = std::stoul(f[4]);
      c.token_count = std::stoul(f[5]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::StorageError, "chunks.tsv line " + std::to_string(i + 1));
    }
    if (offset + length > texts.size()) {
      throw Error(ErrorCode::StorageError, "chunk text offsets out of range for " + c.doc_id);
    }
    c.text = texts.substr(offset, length);
    chunks.push_back(std::move(c));
  }
  if (vectors.size() != chunks.size() * dimension * 4) {
    throw Error(ErrorCode::StorageError, "vectors.f32 size does not match chunk count");
  }

  VectorIndex index(dimension);
  if (!chunks.empty()) index.add(chunks);

  const auto* bytes = reinterpret_cast<const unsigned char*>(vectors.data());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    std::vector<double> dense(dimension, 0.0);
    for (const auto& [b, w] : index.snapshot_->vectors[i]) dense[b] = w;
    for (std::size_t d = 0; d < dimension; ++d) {
      float stored = std::bit_cast<float>(get_u32le(bytes + 4 * (i * dimension + d)));
      if (std::fabs(static_cast<double>(stored) - dense[d]) > 1e-6) {
        throw Error(ErrorCode::StorageError, "vectors.f32 disagrees with chunk texts for " +
                                                 chunks[i].doc_id + "#" + std::to_string(chunks[i].chunk_id));
      }
    }
  }
  return index;
}

std::size_t VectorIndex::ingest_directory(const std::string& dir, std::size_t chunk_size,
                                          std::size_t overlap) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::StorageError, "not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = text::to_lower(entry.path().extension().string());
    if (ext == ".txt" || ext == ".md") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<DocumentChunk> batch;
  for (const auto& path : files) {
    auto rel = fs::relative(path, dir);
    auto doc_id = rel;
    doc_id.replace_extension();
    auto body = text::read_file(path.string());
    auto chunks = chunk_document(doc_id.generic_string(), body, chunk_size, overlap, rel.generic_string());
    batch.insert(batch.end(), std::make_move_iterator(chunks.begin()), std::make_move_iterator(chunks.end()));
  }
  if (batch.empty()) return 0;
  return add(batch);
}

std::string citation(const DocumentChunk& chunk) {
  return chunk.source + "#" + std::to_string(chunk.chunk_id);
}

std::string assemble_context(const std::vector<RetrievalHit>& hits, std::size_t budget) {
  if (budget == 0) throw Error(ErrorCode::InvalidInput, "context budget must be positive");
  std::string out;
  std::size_t used = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const auto& c = hits[i].chunk;
    if (used + c.token_count > budget) break;
    used += c.token_count;
    if (!out.empty()) out += "\n\n";
    out += "[" + std::to_string(i + 1) + "] " + citation(c) + "\n" + c.text;
  }
  return out;
}

}  // namespace agriqa::retrieval
