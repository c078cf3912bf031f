//! Reading `unit_id,attribute,group_id,outcome` files.

use std::io::Read;
use std::path::Path;

use peerfx_core::{Assignment, OutcomeData, Population};

use crate::error::CliError;

/// A parsed dataset. Attribute labels are numbered by first appearance.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ids: Vec<String>,
    /// Distinct attribute labels; label `labels[a]` is attribute `a + 1`.
    pub labels: Vec<String>,
    /// 0-based attribute per unit.
    pub attrs: Vec<usize>,
    pub groups: Option<Vec<String>>,
    pub outcomes: Option<Vec<f64>>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

/// Either every row fills the column or none does.
fn all_or_none(values: Vec<String>, name: &str) -> Result<Option<Vec<String>>, CliError> {
    let filled = values.iter().filter(|v| !v.is_empty()).count();
    if filled == 0 {
        Ok(None)
    } else if filled == values.len() {
        Ok(Some(values))
    } else {
        let row = values.iter().position(String::is_empty).expect("some value is empty") + 2;
        Err(CliError::Validation(format!("line {row}: missing {name} (the column must be filled for every unit or for none)")))
    }
}

impl Dataset {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let file = std::fs::File::open(path).map_err(|e| CliError::Validation(format!("cannot open {}: {e}", path.display())))?;
        Dataset::from_reader(file)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| CliError::Validation(format!("cannot read header: {e}")))?.clone();
        let id_col = column(&headers, "unit_id").ok_or_else(|| CliError::Validation("header lacks `unit_id`".into()))?;
        let attr_col = column(&headers, "attribute").ok_or_else(|| CliError::Validation("header lacks `attribute`".into()))?;
        let group_col = column(&headers, "group_id");
        let outcome_col = column(&headers, "outcome");

        let mut ids = Vec::new();
        let mut labels: Vec<String> = Vec::new();
        let mut attrs = Vec::new();
        let mut groups = Vec::new();
        let mut outcomes = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| CliError::Validation(format!("line {line}: {e}")))?;
            let field = |c: Option<usize>| c.and_then(|c| rec.get(c)).unwrap_or("").to_string();
            let id = field(Some(id_col));
            if id.is_empty() {
                return Err(CliError::Validation(format!("line {line}: empty unit_id")));
            }
            let label = field(Some(attr_col));
            if label.is_empty() {
                return Err(CliError::Validation(format!("line {line}: empty attribute")));
            }
            let a = match labels.iter().position(|l| *l == label) {
                Some(a) => a,
                None => {
                    labels.push(label);
                    labels.len() - 1
                }
            };
            ids.push(id);
            attrs.push(a);
            groups.push(field(group_col));
            outcomes.push(field(outcome_col));
        }
        if ids.is_empty() {
            return Err(CliError::Validation("dataset has no units".into()));
        }
        let groups = all_or_none(groups, "group_id")?;
        let outcomes = match all_or_none(outcomes, "outcome")? {
            None => None,
            Some(raw) => Some(
                raw.iter()
                    .enumerate()
                    .map(|(i, s)| match s.parse::<f64>() {
                        Ok(y) if y.is_finite() => Ok(y),
                        _ => Err(CliError::Validation(format!("line {}: outcome `{s}` is not a finite number", i + 2))),
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };
        Ok(Dataset { ids, labels, attrs, groups, outcomes })
    }

    /// `K` implied by the group column. All groups must have the same size.
    pub fn inferred_k(&self) -> Result<Option<usize>, CliError> {
        let Some(groups) = &self.groups else { return Ok(None) };
        let mut sizes = std::collections::BTreeMap::<&str, usize>::new();
        for g in groups {
            *sizes.entry(g.as_str()).or_default() += 1;
        }
        let mut distinct: Vec<usize> = sizes.values().copied().collect();
        distinct.sort_unstable();
        distinct.dedup();
        match distinct.as_slice() {
            [s] if *s >= 2 => Ok(Some(s - 1)),
            [_] => Err(CliError::Validation("groups must have at least two members".into())),
            _ => Err(CliError::Validation(format!("groups have mixed sizes {distinct:?}; all groups must have K+1 members"))),
        }
    }

    /// The population, taking `K` from the groups when present. An explicit
    /// `k` must agree with them.
    pub fn population(&self, k: Option<usize>) -> Result<Population, CliError> {
        let k = match (self.inferred_k()?, k) {
            (Some(g), Some(k)) if g != k => return Err(CliError::Validation(format!("--k {k} disagrees with observed group size {}", g + 1))),
            (Some(g), _) => g,
            (None, Some(k)) => k,
            (None, None) => return Err(CliError::Validation("no group_id column; pass --k".into())),
        };
        Ok(Population::new(self.ids.clone(), self.attrs.clone(), k)?)
    }

    pub fn assignment(&self, pop: &Population) -> Result<Assignment, CliError> {
        let groups = self.groups.as_ref().ok_or_else(|| CliError::Validation("this command needs a group_id column".into()))?;
        Ok(Assignment::from_labels(groups, pop)?)
    }

    pub fn outcome_data(&self, k: Option<usize>) -> Result<OutcomeData, CliError> {
        let pop = self.population(k)?;
        let z = self.assignment(&pop)?;
        let y = self.outcomes.clone().ok_or_else(|| CliError::Validation("this command needs an outcome column".into()))?;
        Ok(OutcomeData::new(pop, z, y)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_by_first_appearance() {
        let csv = "unit_id,attribute,group_id,outcome\na,math,g1,1\nb,cs,g1,2\nc,math,g2,3\nd,cs,g2,4\n";
        let d = Dataset::from_reader(csv.as_bytes()).unwrap();
        assert_eq!(d.labels, ["math", "cs"]);
        assert_eq!(d.attrs, [0, 1, 0, 1]);
        assert_eq!(d.inferred_k().unwrap(), Some(1));
        let data = d.outcome_data(None).unwrap();
        assert_eq!(data.composition(), vec![0, 2, 0]);
    }

    #[test]
    fn optional_columns() {
        let d = Dataset::from_reader("unit_id,attribute\nx,1\ny,2\n".as_bytes()).unwrap();
        assert!(d.groups.is_none() && d.outcomes.is_none());
        assert!(d.population(None).is_err());
        assert_eq!(d.population(Some(1)).unwrap().n(), 2);
    }

    #[test]
    fn rejects_bad_rows() {
        let mixed = "unit_id,attribute,group_id\na,1,g1\nb,1,g1\nc,2,g1\nd,2,g2\n";
        assert!(Dataset::from_reader(mixed.as_bytes()).unwrap().inferred_k().is_err());
        let missing = "unit_id,attribute,group_id,outcome\na,1,g1,1\nb,1,g1,\n";
        assert!(Dataset::from_reader(missing.as_bytes()).is_err());
        let nan = "unit_id,attribute,outcome\na,1,NaN\n";
        assert!(Dataset::from_reader(nan.as_bytes()).is_err());
        let dup = "unit_id,attribute,group_id\na,1,g1\na,2,g1\n";
        assert!(Dataset::from_reader(dup.as_bytes()).unwrap().population(None).is_err());
    }
}
