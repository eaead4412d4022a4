use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::GlmmError;

/// Synthetic level that absorbs every level observed fewer than
/// `min_level_count` times.
pub const MERGED_LEVEL: &str = "other_merged";

/// One scored utterance as seen by the regression.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub group: String,
    pub level: String,
    pub errors: u32,
    pub ref_len: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub attribute: String,
    /// `None` selects the most frequent level (ties broken by name).
    pub reference_level: Option<String>,
    pub include_log_ref_len: bool,
    pub min_level_count: usize,
    pub continuity_correction: bool,
}

impl DesignSpec {
    pub fn new(attribute: impl Into<String>) -> Self {
        Self {
            attribute: attribute.into(),
            reference_level: None,
            include_log_ref_len: true,
            min_level_count: 10,
            continuity_correction: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum Column {
    Intercept,
    Level(String),
    LogRefLen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelInfo {
    pub name: String,
    pub rows: usize,
    /// Original labels folded into this level (only for [`MERGED_LEVEL`]).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub merged_from: Vec<String>,
    /// Whether the continuity correction was applied to this level.
    #[serde(default)]
    pub corrected: bool,
}

/// Model matrices for one attribute: response, offset, fixed-effect columns
/// and the grouping of rows into speakers.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub(crate) response: Vec<f64>,
    pub(crate) offset: Vec<f64>,
    /// Row-major, `n_rows × columns.len()`.
    pub(crate) x: Vec<f64>,
    pub(crate) columns: Vec<Column>,
    pub(crate) groups: Vec<usize>,
    pub(crate) n_groups: usize,
    pub(crate) attribute: String,
    pub(crate) levels: Vec<LevelInfo>,
    pub(crate) row_level: Vec<usize>,
    pub(crate) xbar: f64,
}

impl Design {
    /// Assembles a design from raw parts. `x` is row-major and `groups`
    /// holds dense group indices starting at zero.
    pub fn from_parts(
        response: Vec<f64>,
        offset: Vec<f64>,
        x: Vec<f64>,
        columns: Vec<Column>,
        groups: Vec<usize>,
    ) -> Result<Self, GlmmError> {
        let n = response.len();
        if n == 0 {
            return Err(GlmmError::EmptyDesign);
        }
        let p = columns.len();
        if offset.len() != n || groups.len() != n || x.len() != n * p {
            return Err(GlmmError::DimensionMismatch {
                model: x.len(),
                design: n * p,
            });
        }
        if let Some(row) = response.iter().position(|y| !(y.is_finite() && *y >= 0.0)) {
            return Err(GlmmError::InvalidRow {
                row,
                reason: "response must be a nonnegative count".into(),
            });
        }
        let n_groups = groups.iter().max().map_or(0, |g| g + 1);
        let xbar = offset.iter().sum::<f64>() / n as f64;
        Ok(Self {
            response,
            offset,
            x,
            columns,
            groups,
            n_groups,
            attribute: String::new(),
            levels: Vec::new(),
            row_level: vec![0; n],
            xbar,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn group_index(&self) -> &[usize] {
        &self.groups
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.columns.len();
        &self.x[i * p..(i + 1) * p]
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    /// Levels after merging; the reference level comes first.
    pub fn levels(&self) -> &[LevelInfo] {
        &self.levels
    }

    pub fn reference_level(&self) -> Option<&str> {
        self.levels.first().map(|l| l.name.as_str())
    }

    pub fn level_of_row(&self, i: usize) -> &str {
        &self.levels[self.row_level[i]].name
    }

    /// Mean of `log N_i` over the rows.
    pub fn mean_log_ref_len(&self) -> f64 {
        self.xbar
    }

    /// Number of attribute dummy columns.
    pub fn attribute_df(&self) -> u32 {
        self.columns
            .iter()
            .filter(|c| matches!(c, Column::Level(_)))
            .count() as u32
    }

    /// The nested model without the attribute dummies. Response, offset and
    /// grouping are shared so the two fits are comparable.
    pub fn without_attribute(&self) -> Design {
        let keep: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| !matches!(c, Column::Level(_)))
            .map(|(k, _)| k)
            .collect();
        let p = self.columns.len();
        let mut x = Vec::with_capacity(self.n_rows() * keep.len());
        for i in 0..self.n_rows() {
            x.extend(keep.iter().map(|&k| self.x[i * p + k]));
        }
        Design {
            x,
            columns: keep.iter().map(|&k| self.columns[k].clone()).collect(),
            ..self.clone()
        }
    }
}

/// Dummy-codes `spec.attribute` against its reference level and adds the
/// centered `log N` covariate. The response is the raw error count and the
/// offset is `log N`.
pub fn build_design(rows: &[DesignRow], spec: &DesignSpec) -> Result<Design, GlmmError> {
    if rows.is_empty() {
        return Err(GlmmError::EmptyDesign);
    }
    if let Some(row) = rows.iter().position(|r| r.ref_len == 0) {
        return Err(GlmmError::InvalidRow {
            row,
            reason: "reference length must be at least 1".into(),
        });
    }

    let mut raw_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in rows {
        *raw_counts.entry(r.level.as_str()).or_default() += 1;
    }

    // fold rare levels
    let mut merged_from = Vec::new();
    let mut level_counts: BTreeMap<String, usize> = BTreeMap::new();
    for (&level, &count) in &raw_counts {
        if count < spec.min_level_count && raw_counts.len() > 1 {
            merged_from.push(level.to_string());
            *level_counts.entry(MERGED_LEVEL.to_string()).or_default() += count;
        } else {
            *level_counts.entry(level.to_string()).or_default() += count;
        }
    }
    let canonical = |label: &str| -> String {
        if merged_from.iter().any(|m| m == label) {
            MERGED_LEVEL.to_string()
        } else {
            label.to_string()
        }
    };

    if level_counts.len() < 2 {
        return Err(GlmmError::SingleLevelAttribute(spec.attribute.clone()));
    }

    let reference = match &spec.reference_level {
        Some(level) => {
            let level = canonical(level);
            if !level_counts.contains_key(&level) {
                return Err(GlmmError::UnknownLevel(level));
            }
            level
        }
        None => level_counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(l, _)| l.clone())
            .expect("at least two levels"),
    };

    let mut levels: Vec<LevelInfo> = Vec::with_capacity(level_counts.len());
    levels.push(LevelInfo {
        name: reference.clone(),
        rows: level_counts[&reference],
        merged_from: Vec::new(),
        corrected: false,
    });
    for (name, &count) in &level_counts {
        if *name != reference {
            levels.push(LevelInfo {
                name: name.clone(),
                rows: count,
                merged_from: Vec::new(),
                corrected: false,
            });
        }
    }
    for l in &mut levels {
        if l.name == MERGED_LEVEL {
            l.merged_from = merged_from.clone();
        }
    }
    let level_index: HashMap<String, usize> = levels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.name.clone(), i))
        .collect();

    let n = rows.len();
    let row_level: Vec<usize> = rows.iter().map(|r| level_index[&canonical(&r.level)]).collect();
    let offset: Vec<f64> = rows.iter().map(|r| f64::from(r.ref_len).ln()).collect();
    let mut response: Vec<f64> = rows.iter().map(|r| f64::from(r.errors)).collect();
    let xbar = offset.iter().sum::<f64>() / n as f64;

    // continuity correction for levels without a single error
    let mut level_errors = vec![0.0; levels.len()];
    for (i, y) in response.iter().enumerate() {
        level_errors[row_level[i]] += y;
    }
    let total_errors: f64 = level_errors.iter().sum();
    for (k, level) in levels.iter_mut().enumerate() {
        if level_errors[k] == 0.0 && total_errors > 0.0 {
            if !spec.continuity_correction {
                return Err(GlmmError::Separation(level.name.clone()));
            }
            let share = 0.5 / level.rows as f64;
            for (i, y) in response.iter_mut().enumerate() {
                if row_level[i] == k {
                    *y += share;
                }
            }
            level.corrected = true;
        }
    }

    let centered: Vec<f64> = offset.iter().map(|o| o - xbar).collect();
    let covariate_varies = centered.iter().any(|c| c.abs() > 1e-12);

    let mut columns = vec![Column::Intercept];
    columns.extend(levels.iter().skip(1).map(|l| Column::Level(l.name.clone())));
    if spec.include_log_ref_len && covariate_varies {
        columns.push(Column::LogRefLen);
    }
    let p = columns.len();
    let mut x = vec![0.0; n * p];
    for i in 0..n {
        let row = &mut x[i * p..(i + 1) * p];
        row[0] = 1.0;
        if row_level[i] > 0 {
            row[row_level[i]] = 1.0;
        }
        if columns.last() == Some(&Column::LogRefLen) {
            row[p - 1] = centered[i];
        }
    }

    let mut group_ids: HashMap<&str, usize> = HashMap::new();
    let mut groups = Vec::with_capacity(n);
    for r in rows {
        let next = group_ids.len();
        groups.push(*group_ids.entry(r.group.as_str()).or_insert(next));
    }

    Ok(Design {
        response,
        offset,
        x,
        columns,
        n_groups: group_ids.len(),
        groups,
        attribute: spec.attribute.clone(),
        levels,
        row_level,
        xbar,
    })
}
