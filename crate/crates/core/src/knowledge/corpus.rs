use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::KnowledgeError;

/// The six kinds of local help document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    AllrunRef,
    CaseStruct,
    Commands,
    InputFiles,
    SolverDescribe,
    SolverHelp,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::AllrunRef,
        Category::CaseStruct,
        Category::Commands,
        Category::InputFiles,
        Category::SolverDescribe,
        Category::SolverHelp,
    ];

    /// Directory name under the corpus root.
    pub fn dir_name(self) -> &'static str {
        match self {
            Category::AllrunRef => "allrun_ref",
            Category::CaseStruct => "case_struct",
            Category::Commands => "commands",
            Category::InputFiles => "input_files",
            Category::SolverDescribe => "solver_describe",
            Category::SolverHelp => "solver_help",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl FromStr for Category {
    type Err = KnowledgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.dir_name() == s)
            .ok_or_else(|| KnowledgeError::UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeDoc {
    pub category: Category,
    pub name: String,
    pub body: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub docs: Vec<KnowledgeDoc>,
}

impl Corpus {
    pub fn counts(&self) -> BTreeMap<Category, usize> {
        let mut counts: BTreeMap<Category, usize> = Category::ALL.iter().map(|c| (*c, 0)).collect();
        for doc in &self.docs {
            *counts.entry(doc.category).or_default() += 1;
        }
        counts
    }

    pub fn docs_in(&self, category: Category) -> impl Iterator<Item = &KnowledgeDoc> {
        self.docs.iter().filter(move |d| d.category == category)
    }

    /// Solver name to one-line description, from `name: description` records.
    pub fn solver_descriptions(&self) -> BTreeMap<String, String> {
        self.docs_in(Category::SolverDescribe)
            .flat_map(|d| d.body.lines())
            .filter_map(|line| {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    return None;
                }
                let (name, desc) = line.split_once(':')?;
                let (name, desc) = (name.trim(), desc.trim());
                (!name.is_empty() && !desc.is_empty()).then(|| (name.to_string(), desc.to_string()))
            })
            .collect()
    }
}

/// Loads `<root>/<category>/<name>.txt` for all six categories.
///
/// Every category directory must exist, but may be empty. Whitespace-only
/// files are skipped. Documents are ordered by category, then name.
pub fn load_corpus(root: &Path) -> Result<Corpus, KnowledgeError> {
    let mut docs = Vec::new();
    for category in Category::ALL {
        let dir = root.join(category.dir_name());
        if !dir.is_dir() {
            return Err(KnowledgeError::MissingCategory(category.dir_name().to_string()));
        }
        let read = fs::read_dir(&dir).map_err(|source| KnowledgeError::Io { path: dir.clone(), source })?;
        let mut paths: Vec<_> = read
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        for path in paths {
            let body = fs::read_to_string(&path).map_err(|source| KnowledgeError::Io { path: path.clone(), source })?;
            if body.trim().is_empty() {
                log::warn!("skipping empty knowledge document {}", path.display());
                continue;
            }
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            docs.push(KnowledgeDoc { category, name, body });
        }
    }
    if docs.is_empty() {
        return Err(KnowledgeError::EmptyCorpus(root.to_path_buf()));
    }
    Ok(Corpus { docs })
}
