//! Chunk index with TF-IDF cosine ranking.
//!
//! Terms are maximal runs of ASCII letters and digits, lowercased. For a
//! category with `N` chunks and a term found in `df` of them,
//!
//! ```text
//! idf(t)    = ln((1 + N) / (1 + df)) + 1
//! w(t, c)   = (1 + ln tf(t, c)) * idf(t)
//! score(q,c)= <w(q), w(c)> / (|w(q)| |w(c)|)
//! ```
//!
//! Query terms unknown to the category are ignored. Scores lie in `[0, 1]`
//! and a chunk queried with its own text scores 1. Ties are broken by
//! document name, then ordinal.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chunk::chunk_document;
use super::{Category, Corpus, KnowledgeDoc, KnowledgeError};

pub const INDEX_MAGIC: &str = "SWARMFOAM-INDEX 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexParams {
    pub chunk_size: usize,
    pub overlap: usize,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self {
            chunk_size: super::DEFAULT_CHUNK_SIZE,
            overlap: super::DEFAULT_OVERLAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DocRef {
    pub category: Category,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeChunk {
    pub doc_ref: DocRef,
    pub ordinal: usize,
    pub text: String,
    /// Byte offset in `text` where the part not shared with the previous chunk begins.
    pub fresh_offset: usize,
}

impl KnowledgeChunk {
    pub fn fresh_text(&self) -> &str {
        &self.text[self.fresh_offset..]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredChunk {
    pub chunk: KnowledgeChunk,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult {
    pub query: String,
    pub category: Category,
    pub hits: Vec<ScoredChunk>,
}

impl RetrievalResult {
    /// Hit texts joined for prompt embedding.
    pub fn joined_text(&self) -> String {
        self.hits
            .iter()
            .map(|h| h.chunk.text.trim())
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// Ranked lookup over the knowledge base.
pub trait Retriever: Send + Sync {
    fn retrieve(&self, query: &str, category: Category, k: usize) -> Result<RetrievalResult, KnowledgeError>;
}

#[derive(Debug, Clone, Default)]
struct CategoryStats {
    idf: HashMap<String, f64>,
    /// Per chunk (index into `Index::chunks`): normalized weight vector.
    vectors: Vec<(usize, HashMap<String, f64>)>,
}

#[derive(Debug, Clone)]
pub struct Index {
    params: IndexParams,
    chunks: Vec<KnowledgeChunk>,
    stats: BTreeMap<Category, CategoryStats>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    params: IndexParams,
    chunks: Vec<KnowledgeChunk>,
}

/// Lowercased alphanumeric terms.
pub fn score_terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

fn term_counts(text: &str) -> HashMap<String, usize> {
    let mut tf = HashMap::new();
    for t in score_terms(text) {
        *tf.entry(t).or_insert(0) += 1;
    }
    tf
}

fn weigh(tf: &HashMap<String, usize>, idf: &HashMap<String, f64>) -> HashMap<String, f64> {
    let mut v: HashMap<String, f64> = tf
        .iter()
        .filter_map(|(t, &n)| idf.get(t).map(|w| (t.clone(), (1.0 + (n as f64).ln()) * w)))
        .collect();
    let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.values_mut() {
            *x /= norm;
        }
    }
    v
}

fn dot(a: &HashMap<String, f64>, b: &HashMap<String, f64>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    // sorted keys keep the float summation order independent of hash seeds
    let mut keys: Vec<&String> = small.keys().filter(|k| large.contains_key(*k)).collect();
    keys.sort();
    keys.into_iter().map(|k| small[k] * large[k]).sum()
}

pub fn build_index(corpus: &Corpus, params: IndexParams) -> Result<Index, KnowledgeError> {
    if params.chunk_size <= params.overlap {
        return Err(KnowledgeError::InvalidParams {
            chunk_size: params.chunk_size,
            overlap: params.overlap,
        });
    }
    let mut docs: Vec<_> = corpus.docs.iter().collect();
    docs.sort_by(|a, b| (a.category, &a.name).cmp(&(b.category, &b.name)));
    let mut chunks = Vec::new();
    for doc in docs {
        for (ordinal, span) in chunk_document(&doc.body, params.chunk_size, params.overlap)
            .into_iter()
            .enumerate()
        {
            chunks.push(KnowledgeChunk {
                doc_ref: DocRef { category: doc.category, name: doc.name.clone() },
                ordinal,
                text: doc.body[span.window.clone()].to_string(),
                fresh_offset: span.fresh_start - span.window.start,
            });
        }
    }
    Ok(Index::from_chunks(params, chunks))
}

impl Index {
    fn from_chunks(params: IndexParams, chunks: Vec<KnowledgeChunk>) -> Self {
        let mut stats: BTreeMap<Category, CategoryStats> = BTreeMap::new();
        type TermCounts = (usize, HashMap<String, usize>);
        let mut counts: BTreeMap<Category, Vec<TermCounts>> = BTreeMap::new();
        for (i, c) in chunks.iter().enumerate() {
            counts.entry(c.doc_ref.category).or_default().push((i, term_counts(&c.text)));
        }
        for (category, tfs) in counts {
            let n = tfs.len() as f64;
            let mut df: HashMap<String, usize> = HashMap::new();
            for (_, tf) in &tfs {
                for t in tf.keys() {
                    *df.entry(t.clone()).or_insert(0) += 1;
                }
            }
            let idf: HashMap<String, f64> = df
                .into_iter()
                .map(|(t, d)| (t, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
                .collect();
            let vectors = tfs.iter().map(|(i, tf)| (*i, weigh(tf, &idf))).collect();
            stats.insert(category, CategoryStats { idf, vectors });
        }
        Self { params, chunks, stats }
    }

    pub fn params(&self) -> IndexParams {
        self.params
    }

    pub fn chunks(&self) -> &[KnowledgeChunk] {
        &self.chunks
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Rebuilds the source documents from the chunks' fresh parts.
    pub fn corpus(&self) -> Corpus {
        let mut docs: Vec<KnowledgeDoc> = Vec::new();
        for c in &self.chunks {
            match docs.last_mut() {
                Some(d) if d.category == c.doc_ref.category && d.name == c.doc_ref.name => {
                    d.body.push_str(c.fresh_text())
                }
                _ => docs.push(KnowledgeDoc {
                    category: c.doc_ref.category,
                    name: c.doc_ref.name.clone(),
                    body: c.fresh_text().to_string(),
                }),
            }
        }
        Corpus { docs }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let body = serde_json::to_string(&IndexFile {
            params: self.params,
            chunks: self.chunks.clone(),
        })
        .expect("index serializes");
        format!("{INDEX_MAGIC}\n{body}\n").into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KnowledgeError> {
        let text = std::str::from_utf8(bytes).map_err(|e| KnowledgeError::BadIndex(e.to_string()))?;
        let (magic, body) = text
            .split_once('\n')
            .ok_or_else(|| KnowledgeError::BadIndex("missing header".into()))?;
        if magic != INDEX_MAGIC {
            return Err(KnowledgeError::BadIndex(format!("unexpected header '{magic}'")));
        }
        let file: IndexFile = serde_json::from_str(body).map_err(|e| KnowledgeError::BadIndex(e.to_string()))?;
        Ok(Self::from_chunks(file.params, file.chunks))
    }

    pub fn save(&self, path: &Path) -> Result<(), KnowledgeError> {
        fs::write(path, self.to_bytes()).map_err(|source| KnowledgeError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, KnowledgeError> {
        let bytes = fs::read(path).map_err(|source| KnowledgeError::Io { path: path.to_path_buf(), source })?;
        Self::from_bytes(&bytes)
    }

    /// Same as [`Retriever::retrieve`] with the category given by directory name.
    pub fn retrieve_named(&self, query: &str, category: &str, k: usize) -> Result<RetrievalResult, KnowledgeError> {
        self.retrieve(query, category.parse()?, k)
    }
}

impl Retriever for Index {
    fn retrieve(&self, query: &str, category: Category, k: usize) -> Result<RetrievalResult, KnowledgeError> {
        if k == 0 {
            return Err(KnowledgeError::InvalidK);
        }
        let mut hits: Vec<ScoredChunk> = match self.stats.get(&category) {
            None => Vec::new(),
            Some(stats) => {
                let q = weigh(&term_counts(query), &stats.idf);
                stats
                    .vectors
                    .iter()
                    .map(|(i, v)| ScoredChunk {
                        chunk: self.chunks[*i].clone(),
                        score: dot(&q, v).max(0.0),
                    })
                    .collect()
            }
        };
        hits.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.chunk.doc_ref.name.cmp(&b.chunk.doc_ref.name))
                .then_with(|| a.chunk.ordinal.cmp(&b.chunk.ordinal))
        });
        hits.truncate(k);
        Ok(RetrievalResult {
            query: query.to_string(),
            category,
            hits,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Corpus {
        let doc = |category, name: &str, body: &str| KnowledgeDoc {
            category,
            name: name.into(),
            body: body.into(),
        };
        Corpus {
            docs: vec![
                doc(Category::CaseStruct, "cavity", "case cavity solver icoFoam files 0/p 0/U system/blockMeshDict"),
                doc(Category::CaseStruct, "pitzDaily", "case pitzDaily solver simpleFoam files 0/p 0/U 0/k 0/epsilon"),
                doc(Category::CaseStruct, "damBreak", "case damBreak solver interFoam files 0/alpha.water 0/p_rgh"),
                doc(Category::Commands, "blockMesh", "blockMesh generates a cavity mesh from blockMeshDict"),
            ],
        }
    }

    #[test]
    fn ranks_by_relevance_within_category() {
        let idx = build_index(&corpus(), IndexParams::default()).unwrap();
        let res = idx.retrieve("icoFoam cavity", Category::CaseStruct, 2).unwrap();
        assert_eq!(res.hits.len(), 2);
        assert_eq!(res.hits[0].chunk.doc_ref.name, "cavity");
        assert!(res.hits[0].score >= res.hits[1].score);
        assert!(res.hits.iter().all(|h| h.chunk.doc_ref.category == Category::CaseStruct));
    }

    #[test]
    fn empty_index_returns_nothing() {
        let idx = build_index(&Corpus::default(), IndexParams::default()).unwrap();
        assert!(idx.is_empty());
        assert!(idx.retrieve("anything", Category::Commands, 3).unwrap().hits.is_empty());
    }

    #[test]
    fn large_k_returns_everything_sorted() {
        let idx = build_index(&corpus(), IndexParams::default()).unwrap();
        let res = idx.retrieve("solver files", Category::CaseStruct, 50).unwrap();
        assert_eq!(res.hits.len(), 3);
        assert!(res.hits.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn zero_k_rejected() {
        let idx = build_index(&corpus(), IndexParams::default()).unwrap();
        assert!(matches!(idx.retrieve("x", Category::Commands, 0), Err(KnowledgeError::InvalidK)));
        assert!(matches!(idx.retrieve_named("x", "nope", 1), Err(KnowledgeError::UnknownCategory(_))));
    }

    #[test]
    fn bad_params() {
        let p = IndexParams { chunk_size: 50, overlap: 50 };
        assert!(matches!(build_index(&corpus(), p), Err(KnowledgeError::InvalidParams { .. })));
    }

    #[test]
    fn file_round_trip() {
        let idx = build_index(&corpus(), IndexParams { chunk_size: 4, overlap: 1 }).unwrap();
        let bytes = idx.to_bytes();
        assert!(bytes.starts_with(INDEX_MAGIC.as_bytes()));
        let back = Index::from_bytes(&bytes).unwrap();
        assert_eq!(back.chunks(), idx.chunks());
        assert_eq!(back.to_bytes(), bytes);
        assert!(Index::from_bytes(b"OTHER\n{}").is_err());
    }

    #[test]
    fn documents_rebuilt_from_chunks() {
        let c = corpus();
        let idx = build_index(&c, IndexParams { chunk_size: 3, overlap: 1 }).unwrap();
        let mut want = c.docs.clone();
        want.sort_by(|a, b| (a.category, &a.name).cmp(&(b.category, &b.name)));
        assert_eq!(idx.corpus().docs, want);
    }

    #[test]
    fn self_query_scores_one() {
        let idx = build_index(&corpus(), IndexParams::default()).unwrap();
        for c in idx.chunks() {
            let res = idx.retrieve(&c.text, c.doc_ref.category, 1).unwrap();
            assert_eq!(&res.hits[0].chunk, c);
            assert!((res.hits[0].score - 1.0).abs() < 1e-12);
        }
    }
}
