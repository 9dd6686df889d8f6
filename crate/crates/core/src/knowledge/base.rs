use std::collections::BTreeMap;

use super::{build_index, Category, Corpus, Index, IndexParams, KnowledgeError, RetrievalResult, Retriever};

/// Default number of chunks injected per retrieval site.
pub const DEFAULT_RETRIEVAL_K: usize = 3;

/// What the agents consult: a retriever plus the solver catalogue.
pub struct KnowledgeBase {
    retriever: Box<dyn Retriever>,
    solvers: BTreeMap<String, String>,
    k: usize,
    k_per_category: BTreeMap<Category, usize>,
}

impl std::fmt::Debug for KnowledgeBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KnowledgeBase")
            .field("solvers", &self.solvers.len())
            .field("k", &self.k)
            .finish()
    }
}

impl KnowledgeBase {
    pub fn new(retriever: Box<dyn Retriever>, solvers: BTreeMap<String, String>, k: usize) -> Result<Self, KnowledgeError> {
        if k == 0 {
            return Err(KnowledgeError::InvalidK);
        }
        Ok(Self { retriever, solvers, k, k_per_category: BTreeMap::new() })
    }

    pub fn from_corpus(corpus: &Corpus, params: IndexParams, k: usize) -> Result<Self, KnowledgeError> {
        let index = build_index(corpus, params)?;
        Self::new(Box::new(index), corpus.solver_descriptions(), k)
    }

    pub fn from_index(index: Index, k: usize) -> Result<Self, KnowledgeError> {
        let solvers = index.corpus().solver_descriptions();
        Self::new(Box::new(index), solvers, k)
    }

    /// Overrides the default `k` for one category.
    pub fn with_category_k(mut self, category: Category, k: usize) -> Result<Self, KnowledgeError> {
        if k == 0 {
            return Err(KnowledgeError::InvalidK);
        }
        self.k_per_category.insert(category, k);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn k_for(&self, category: Category) -> usize {
        self.k_per_category.get(&category).copied().unwrap_or(self.k)
    }

    pub fn retrieve(&self, query: &str, category: Category) -> Result<RetrievalResult, KnowledgeError> {
        self.retriever.retrieve(query, category, self.k_for(category))
    }

    pub fn retrieve_top(&self, query: &str, category: Category, k: usize) -> Result<RetrievalResult, KnowledgeError> {
        self.retriever.retrieve(query, category, k)
    }

    pub fn solver_descriptions(&self) -> &BTreeMap<String, String> {
        &self.solvers
    }

    /// `name: description` lines for prompts.
    pub fn solver_list(&self) -> String {
        self.solvers
            .iter()
            .map(|(n, d)| format!("{n}: {d}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::KnowledgeDoc;

    #[test]
    fn solver_catalogue_survives_index_round_trip() {
        let corpus = Corpus {
            docs: vec![KnowledgeDoc {
                category: Category::SolverDescribe,
                name: "incompressible".into(),
                body: "icoFoam: Transient solver for incompressible, laminar flow of Newtonian fluids.\nsimpleFoam: Steady-state solver.\n".into(),
            }],
        };
        let direct = KnowledgeBase::from_corpus(&corpus, IndexParams { chunk_size: 4, overlap: 1 }, 3).unwrap();
        let idx = build_index(&corpus, IndexParams { chunk_size: 4, overlap: 1 }).unwrap();
        let loaded = KnowledgeBase::from_index(Index::from_bytes(&idx.to_bytes()).unwrap(), 3).unwrap();
        assert_eq!(direct.solver_descriptions(), loaded.solver_descriptions());
        assert_eq!(loaded.solver_descriptions().len(), 2);
        assert!(direct.solver_list().starts_with("icoFoam: Transient"));
    }

    #[test]
    fn category_k_override() {
        let corpus = Corpus { docs: vec![] };
        let kb = KnowledgeBase::from_corpus(&corpus, IndexParams::default(), 3)
            .unwrap()
            .with_category_k(Category::InputFiles, 1)
            .unwrap();
        assert_eq!((kb.k_for(Category::InputFiles), kb.k_for(Category::SolverHelp)), (1, 3));
        assert!(kb.with_category_k(Category::CaseStruct, 0).is_err());
    }
}
