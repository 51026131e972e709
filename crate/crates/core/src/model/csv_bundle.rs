//! CSV bundle: one file per table, same semantics as the JSON layout.
//!
//! | file               | columns                        | required |
//! |--------------------|--------------------------------|----------|
//! | requirements.csv   | id,name,effort                 | yes      |
//! | stakeholders.csv   | id,weight                      | no       |
//! | values.csv         | stakeholder,requirement,value  | no       |
//! | satisfactions.csv  | id,satisfaction                | no       |
//! | dependencies.csv   | kind,from,to                   | no       |
//! | interactions.csv   | matrix,i,j,delta               | no       |
//! | settings.csv       | key,value                      | no       |
//!
//! `matrix` is `deltaS` or `deltaE`; the only setting key is `effort_bound`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::{
    DependencyEntry, InteractionEntry, Loaded, ProblemFile, ProblemInstance, RequirementEntry, StakeholderEntry,
    ValueEntry,
};
use crate::error::{Error, Result};

const KNOWN: [&str; 7] = [
    "requirements.csv",
    "stakeholders.csv",
    "values.csv",
    "satisfactions.csv",
    "dependencies.csv",
    "interactions.csv",
    "settings.csv",
];

#[derive(Debug, Clone, Default)]
pub struct CsvBundle {
    files: BTreeMap<String, Vec<u8>>,
}

#[derive(Deserialize)]
struct RequirementRow {
    id: String,
    #[serde(default)]
    name: Option<String>,
    effort: f64,
}

#[derive(Deserialize)]
struct SatisfactionRow {
    id: String,
    satisfaction: f64,
}

#[derive(Deserialize)]
struct InteractionRow {
    matrix: String,
    i: String,
    j: String,
    delta: f64,
}

#[derive(Deserialize)]
struct SettingRow {
    key: String,
    value: String,
}

impl CsvBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, contents: impl Into<Vec<u8>>) -> Result<()> {
        if !KNOWN.contains(&name) {
            return Err(Error::Parse(format!("unknown bundle file {name:?}")));
        }
        self.files.insert(name.to_owned(), contents.into());
        Ok(())
    }

    /// Reads every known file present in `dir`.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let mut bundle = Self::new();
        for name in KNOWN {
            let path = dir.join(name);
            match std::fs::read(&path) {
                Ok(bytes) => {
                    bundle.files.insert(name.to_owned(), bytes);
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(source) => return Err(Error::Io { path, source }),
            }
        }
        Ok(bundle)
    }

    /// Splits a single stream into files. Each file starts with a header line
    /// `--- <name>` and runs until the next header or end of input:
    ///
    /// ```text
    /// --- requirements.csv
    /// id,name,effort
    /// r1,Login,3
    /// --- values.csv
    /// stakeholder,requirement,value
    /// ```
    pub fn parse_concatenated(source: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(source).map_err(|e| Error::Parse(format!("bundle is not UTF-8: {e}")))?;
        let mut bundle = Self::new();
        let mut current: Option<(String, String)> = None;
        for line in text.lines() {
            if let Some(name) = line.strip_prefix("--- ") {
                if let Some((n, body)) = current.take() {
                    bundle.insert_unique(n, body)?;
                }
                current = Some((name.trim().to_owned(), String::new()));
            } else if let Some((_, body)) = current.as_mut() {
                body.push_str(line);
                body.push('\n');
            } else if !line.trim().is_empty() {
                return Err(Error::Parse(
                    "bundle content before the first `--- <file>` header".into(),
                ));
            }
        }
        if let Some((n, body)) = current {
            bundle.insert_unique(n, body)?;
        }
        Ok(bundle)
    }

    fn insert_unique(&mut self, name: String, body: String) -> Result<()> {
        if self.files.contains_key(&name) {
            return Err(Error::Parse(format!("bundle file {name:?} appears twice")));
        }
        self.insert(&name, body)
    }

    pub fn to_problem_file(&self) -> Result<ProblemFile> {
        let Some(reqs) = self.files.get("requirements.csv") else {
            return Err(Error::Parse("bundle is missing requirements.csv".into()));
        };
        let requirements = rows::<RequirementRow>("requirements.csv", reqs)?
            .into_iter()
            .map(|r| RequirementEntry {
                id: r.id,
                name: r.name.filter(|n| !n.is_empty()),
                effort: r.effort,
            })
            .collect();
        let stakeholders = self.table::<StakeholderEntry>("stakeholders.csv")?;
        let values = self.table::<ValueEntry>("values.csv")?;
        let satisfactions = match self.files.get("satisfactions.csv") {
            Some(bytes) => {
                let mut map = BTreeMap::new();
                for row in rows::<SatisfactionRow>("satisfactions.csv", bytes)? {
                    if map.insert(row.id.clone(), row.satisfaction).is_some() {
                        return Err(Error::validation(row.id, "satisfaction given twice"));
                    }
                }
                Some(map)
            }
            None => None,
        };
        let dependencies = self.table::<DependencyEntry>("dependencies.csv")?;
        let mut file = ProblemFile {
            requirements,
            stakeholders,
            values,
            satisfactions,
            dependencies,
            ..Default::default()
        };
        for row in self.table::<InteractionRow>("interactions.csv")? {
            let entry = InteractionEntry {
                i: row.i,
                j: row.j,
                delta: row.delta,
            };
            match row.matrix.as_str() {
                "deltaS" => file.interactions.delta_s.push(entry),
                "deltaE" => file.interactions.delta_e.push(entry),
                other => return Err(Error::Parse(format!("interactions.csv: unknown matrix {other:?}"))),
            }
        }
        for row in self.table::<SettingRow>("settings.csv")? {
            match row.key.as_str() {
                "effort_bound" => {
                    let b = row
                        .value
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("settings.csv: effort_bound: {e}")))?;
                    file.effort_bound = Some(b);
                }
                other => return Err(Error::Parse(format!("settings.csv: unknown key {other:?}"))),
            }
        }
        Ok(file)
    }

    pub fn load(&self) -> Result<Loaded> {
        ProblemInstance::from_file(self.to_problem_file()?)
    }

    fn table<T: DeserializeOwned>(&self, name: &str) -> Result<Vec<T>> {
        match self.files.get(name) {
            Some(bytes) => rows(name, bytes),
            None => Ok(Vec::new()),
        }
    }
}

fn rows<T: DeserializeOwned>(name: &str, bytes: &[u8]) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(bytes);
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::Parse(format!("{name}: {e}"))))
        .collect()
}
