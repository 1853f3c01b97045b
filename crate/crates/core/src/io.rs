//! Plain-text dataset bundles and CSV writers for experiment output.
//!
//! A bundle is a directory holding `edges.tsv`, `features.csv`, `labels.tsv`,
//! and optionally `masks.tsv` and `meta.txt`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::energy::EnergyReport;
use crate::graph::{build_graph, Graph, GraphError};
use crate::linalg::DenseMatrix;
use crate::residual::ResidualStrengths;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("missing required file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {message}")]
    Parse {
        file: &'static str,
        line: usize,
        message: String,
    },
    #[error("inconsistent lengths: {0}")]
    InconsistentLengths(String),
    #[error("labels.tsv:{line}: label {label} is not below the class count {classes}")]
    LabelOutOfRange { line: usize, label: usize, classes: usize },
    #[error("masks.tsv:{line}: a node belongs to more than one split")]
    OverlappingMasks { line: usize },
    #[error("{0} exists and is not empty; pass force to overwrite")]
    OverwriteRefused(PathBuf),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Train/validation/test membership, one flag per node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn train_idx(&self) -> Vec<usize> {
        indices(&self.train)
    }

    pub fn val_idx(&self) -> Vec<usize> {
        indices(&self.val)
    }

    pub fn test_idx(&self) -> Vec<usize> {
        indices(&self.test)
    }

    pub fn is_disjoint(&self) -> bool {
        (0..self.train.len()).all(|i| u8::from(self.train[i]) + u8::from(self.val[i]) + u8::from(self.test[i]) <= 1)
    }
}

fn indices(flags: &[bool]) -> Vec<usize> {
    flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    pub name: String,
    pub graph: Graph,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub masks: Option<Masks>,
    /// Non-fatal findings from loading, e.g. `EmptyEdgeSet`.
    pub warnings: Vec<String>,
}

impl DatasetBundle {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: DenseMatrix,
        labels: Vec<usize>,
        masks: Option<Masks>,
    ) -> Result<Self, BundleError> {
        let n = graph.n();
        if features.rows() != n || labels.len() != n {
            return Err(BundleError::InconsistentLengths(format!(
                "graph has {n} nodes, features {} rows, labels {}",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(m) = &masks {
            if m.train.len() != n || m.val.len() != n || m.test.len() != n {
                return Err(BundleError::InconsistentLengths(
                    "mask length differs from node count".into(),
                ));
            }
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut warnings = Vec::new();
        if graph.num_edges() == 0 {
            warnings.push("EmptyEdgeSet".to_string());
        }
        Ok(Self {
            name: name.into(),
            graph,
            features,
            labels,
            num_classes,
            masks,
            warnings,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }
}

fn read_required(dir: &Path, file: &str) -> Result<String, BundleError> {
    let p = dir.join(file);
    if !p.is_file() {
        return Err(BundleError::MissingFile(p));
    }
    Ok(fs::read_to_string(p)?)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_err(file: &'static str, line: usize, message: impl Into<String>) -> BundleError {
    BundleError::Parse {
        file,
        line,
        message: message.into(),
    }
}

struct Meta {
    name: Option<String>,
    classes: Option<usize>,
    features: Option<usize>,
}

fn parse_meta(text: &str) -> Result<Meta, BundleError> {
    let mut meta = Meta {
        name: None,
        classes: None,
        features: None,
    };
    for (line, l) in content_lines(text) {
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| parse_err("meta.txt", line, "expected key=value"))?;
        let count = || {
            v.trim()
                .parse::<usize>()
                .map_err(|e| parse_err("meta.txt", line, e.to_string()))
        };
        match k.trim() {
            "name" => meta.name = Some(v.trim().to_string()),
            "classes" => meta.classes = Some(count()?),
            "features" => meta.features = Some(count()?),
            other => return Err(parse_err("meta.txt", line, format!("unknown key {other}"))),
        }
    }
    Ok(meta)
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<DatasetBundle, BundleError> {
    let dir = dir.as_ref();
    let edges_text = read_required(dir, "edges.tsv")?;
    let feat_text = read_required(dir, "features.csv")?;
    let label_text = read_required(dir, "labels.tsv")?;
    let meta = match dir.join("meta.txt") {
        p if p.is_file() => Some(parse_meta(&fs::read_to_string(p)?)?),
        _ => None,
    };

    let mut labels = Vec::new();
    let mut label_lines = Vec::new();
    for (line, l) in content_lines(&label_text) {
        let v = l
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err("labels.tsv", line, e.to_string()))?;
        labels.push(v);
        label_lines.push(line);
    }
    let n = labels.len();

    let mut rows = Vec::with_capacity(n);
    let mut width = None;
    for (line, l) in content_lines(&feat_text) {
        let row = l
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| parse_err("features.csv", line, e.to_string()))?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(parse_err("features.csv", line, "non-finite value"));
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(BundleError::InconsistentLengths(format!(
                    "features.csv line {line} has {} columns, expected {w}",
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(BundleError::InconsistentLengths(format!(
            "{} feature rows but {n} labels",
            rows.len()
        )));
    }
    let d = width.unwrap_or(0);
    let features = DenseMatrix::from_vec(n, d, rows.into_iter().flatten().collect())
        .map_err(|e| BundleError::InconsistentLengths(e.to_string()))?;

    let classes = meta.as_ref().and_then(|m| m.classes);
    if let Some(c) = classes {
        if let Some(pos) = labels.iter().position(|&l| l >= c) {
            return Err(BundleError::LabelOutOfRange {
                line: label_lines[pos],
                label: labels[pos],
                classes: c,
            });
        }
    }
    if let Some(f) = meta.as_ref().and_then(|m| m.features) {
        if f != d {
            return Err(BundleError::InconsistentLengths(format!(
                "meta.txt declares {f} features, features.csv has {d}"
            )));
        }
    }

    let mut edges = Vec::new();
    for (line, l) in content_lines(&edges_text) {
        let cols: Vec<&str> = l.split('\t').map(str::trim).collect();
        if cols.len() != 3 && cols.len() != 2 {
            return Err(parse_err("edges.tsv", line, "expected i<TAB>j<TAB>weight"));
        }
        let idx = |t: &str| {
            t.parse::<usize>()
                .map_err(|e| parse_err("edges.tsv", line, e.to_string()))
        };
        let w = match cols.get(2) {
            Some(t) => t
                .parse::<f64>()
                .map_err(|e| parse_err("edges.tsv", line, e.to_string()))?,
            None => 1.0,
        };
        edges.push((idx(cols[0])?, idx(cols[1])?, w));
    }
    let graph = build_graph(&edges, n)?;

    let masks = match dir.join("masks.tsv") {
        p if p.is_file() => Some(parse_masks(&fs::read_to_string(p)?, n)?),
        _ => None,
    };

    let name = meta
        .as_ref()
        .and_then(|m| m.name.clone())
        .or_else(|| dir.file_name().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_default();
    let mut bundle = DatasetBundle::new(name, graph, features, labels, masks)?;
    if let Some(c) = classes {
        bundle.num_classes = c;
    }
    Ok(bundle)
}

fn parse_masks(text: &str, n: usize) -> Result<Masks, BundleError> {
    let mut m = Masks {
        train: Vec::with_capacity(n),
        val: Vec::with_capacity(n),
        test: Vec::with_capacity(n),
    };
    for (line, l) in content_lines(text) {
        let flags = l
            .split('\t')
            .map(|t| match t.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(parse_err(
                    "masks.tsv",
                    line,
                    format!("expected 0 or 1, found {other:?}"),
                )),
            })
            .collect::<Result<Vec<bool>, _>>()?;
        if flags.len() != 3 {
            return Err(parse_err("masks.tsv", line, "expected three columns"));
        }
        if flags.iter().filter(|&&f| f).count() > 1 {
            return Err(BundleError::OverlappingMasks { line });
        }
        m.train.push(flags[0]);
        m.val.push(flags[1]);
        m.test.push(flags[2]);
    }
    if m.train.len() != n {
        return Err(BundleError::InconsistentLengths(format!(
            "masks.tsv has {} rows, expected {n}",
            m.train.len()
        )));
    }
    Ok(m)
}

/// Create `dir` for output, refusing to reuse a non-empty directory unless
/// `force` is set.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<(), BundleError> {
    if dir.exists() {
        let non_empty = !dir.is_dir() || fs::read_dir(dir)?.next().is_some();
        if non_empty && !force {
            return Err(BundleError::OverwriteRefused(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Write `bundle` to `dir`. Features use 17 significant digits so a reload
/// reproduces them bit for bit.
pub fn save_bundle(bundle: &DatasetBundle, dir: impl AsRef<Path>, force: bool) -> Result<(), BundleError> {
    let dir = dir.as_ref();
    prepare_output_dir(dir, force)?;

    let mut s = String::new();
    for (i, j, w) in bundle.graph.undirected_edges() {
        writeln!(s, "{i}\t{j}\t{w:.16e}").unwrap();
    }
    fs::write(dir.join("edges.tsv"), &s)?;

    s.clear();
    for i in 0..bundle.features.rows() {
        let row: Vec<String> = bundle.features.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(s, "{}", row.join(",")).unwrap();
    }
    fs::write(dir.join("features.csv"), &s)?;

    s.clear();
    for l in &bundle.labels {
        writeln!(s, "{l}").unwrap();
    }
    fs::write(dir.join("labels.tsv"), &s)?;

    let masks_path = dir.join("masks.tsv");
    if let Some(m) = &bundle.masks {
        s.clear();
        for i in 0..m.train.len() {
            writeln!(
                s,
                "{}\t{}\t{}",
                u8::from(m.train[i]),
                u8::from(m.val[i]),
                u8::from(m.test[i])
            )
            .unwrap();
        }
        fs::write(&masks_path, &s)?;
    } else if masks_path.exists() {
        fs::remove_file(&masks_path)?;
    }

    fs::write(
        dir.join("meta.txt"),
        format!(
            "name={}\nclasses={}\nfeatures={}\n",
            bundle.name,
            bundle.num_classes,
            bundle.feature_dim()
        ),
    )?;
    Ok(())
}

pub fn write_energy_csv(mut out: impl Write, report: &EnergyReport) -> std::io::Result<()> {
    writeln!(out, "layer,energy,rank,effective_rank")?;
    for l in 0..report.layers() {
        writeln!(
            out,
            "{l},{:.15e},{},{:.15e}",
            report.per_layer_energy[l], report.per_layer_rank[l], report.per_layer_effective_rank[l]
        )?;
    }
    Ok(())
}

pub fn write_lambda_csv(mut out: impl Write, lambda: &ResidualStrengths) -> std::io::Result<()> {
    writeln!(out, "node,lambda")?;
    for (i, v) in lambda.values().iter().enumerate() {
        writeln!(out, "{i},{v:.15e}")?;
    }
    Ok(())
}

pub fn write_matrix_csv(mut out: impl Write, m: &DenseMatrix) -> std::io::Result<()> {
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
