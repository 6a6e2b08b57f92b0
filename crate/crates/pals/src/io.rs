//! File formats: cohort node/edge/ground-truth files, contact logs, weight
//! documents, score and metric tables. All delimited text plus one JSON
//! document, all round-trippable through the readers here, all written
//! atomically (temp file + rename).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::MetricSummary;
use crate::graph::{ContactChannel, ContactEvent, ContactNetwork, NodeRole};
use crate::model::PalsWeights;
use crate::synth::{Cohort, GroundTruth};

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Write a file atomically: contents land under the final name only when
/// complete.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let stamp = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = dir.join(format!(
        ".tmp-{}-{}-{stamp}",
        std::process::id(),
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn format_err(file: &Path, row: Option<usize>, message: impl Into<String>) -> Error {
    Error::Format {
        file: file.display().to_string(),
        row,
        message: message.into(),
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Node table: `id,role,f1..fd`.
pub fn write_nodes(path: &Path, network: &ContactNetwork) -> Result<()> {
    let d = network.feature_dim();
    let mut out = String::from("id,role");
    for k in 1..=d {
        out.push_str(&format!(",f{k}"));
    }
    out.push('\n');
    for i in 0..network.node_count() {
        let role = match network.roles[i] {
            NodeRole::Main => "main",
            NodeRole::Auxiliary => "auxiliary",
        };
        out.push_str(&format!("{},{role}", network.ids[i]));
        for k in 0..d {
            let v = network.features[i].get(k).copied().unwrap_or(0.0);
            out.push_str(&format!(",{}", v as i64));
        }
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Edge table: `src,dst[,last_contact_day]`, one row per undirected edge.
pub fn write_edges(path: &Path, network: &ContactNetwork) -> Result<()> {
    let with_days = network.contact_days.is_some();
    let mut out = String::from(if with_days {
        "src,dst,last_contact_day\n"
    } else {
        "src,dst\n"
    });
    for i in 0..network.node_count() {
        for (pos, &j) in network.neighbors[i].iter().enumerate() {
            // Each undirected pair once: from the smaller endpoint, except
            // main->auxiliary edges which are always written from the main.
            let emit = if network.is_main(i) && !network.is_main(j) {
                true
            } else if !network.is_main(i) && network.is_main(j) {
                false
            } else {
                i < j
            };
            if !emit {
                continue;
            }
            out.push_str(&format!("{},{}", network.ids[i], network.ids[j]));
            if let Some(days) = &network.contact_days {
                out.push_str(&format!(",{}", days[i][pos]));
            }
            out.push('\n');
        }
    }
    write_atomic(path, &out)
}

/// Read a network from its node and edge tables.
pub fn read_network(nodes_path: &Path, edges_path: &Path) -> Result<ContactNetwork> {
    let lines = read_lines(nodes_path)?;
    let header = lines
        .first()
        .ok_or_else(|| format_err(nodes_path, None, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "id" || cols[1] != "role" {
        return Err(format_err(nodes_path, Some(1), "expected header id,role,f1.."));
    }
    let d = cols.len() - 2;
    let mut ids = Vec::new();
    let mut roles = Vec::new();
    let mut features = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (lineno, line) in lines.iter().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != cols.len() {
            return Err(format_err(
                nodes_path,
                Some(lineno + 1),
                format!("expected {} columns, found {}", cols.len(), parts.len()),
            ));
        }
        let id = parts[0].to_string();
        if index.insert(id.clone(), ids.len()).is_some() {
            return Err(format_err(
                nodes_path,
                Some(lineno + 1),
                format!("duplicate node id '{id}'"),
            ));
        }
        roles.push(match parts[1] {
            "main" => NodeRole::Main,
            "auxiliary" => NodeRole::Auxiliary,
            other => {
                return Err(format_err(
                    nodes_path,
                    Some(lineno + 1),
                    format!("unknown role '{other}'"),
                ))
            }
        });
        let mut f = Vec::with_capacity(d);
        for (k, raw) in parts[2..].iter().enumerate() {
            let v: f64 = raw.parse().map_err(|_| {
                format_err(
                    nodes_path,
                    Some(lineno + 1),
                    format!("column f{} is not numeric: '{raw}'", k + 1),
                )
            })?;
            f.push(v);
        }
        features.push(f);
        ids.push(id);
    }
    let n = ids.len();

    let lines = read_lines(edges_path)?;
    let header = lines
        .first()
        .ok_or_else(|| format_err(edges_path, None, "empty file"))?;
    let with_days = match header.as_str() {
        "src,dst" => false,
        "src,dst,last_contact_day" => true,
        other => {
            return Err(format_err(
                edges_path,
                Some(1),
                format!("unexpected header '{other}'"),
            ))
        }
    };
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut days: Vec<Vec<i64>> = vec![Vec::new(); n];
    for (lineno, line) in lines.iter().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != if with_days { 3 } else { 2 } {
            return Err(format_err(edges_path, Some(lineno + 1), "wrong column count"));
        }
        let resolve = |id: &str| {
            index.get(id).copied().ok_or_else(|| {
                format_err(
                    edges_path,
                    Some(lineno + 1),
                    format!("unknown node id '{id}'"),
                )
            })
        };
        let a = resolve(parts[0])?;
        let b = resolve(parts[1])?;
        if a == b {
            return Err(format_err(edges_path, Some(lineno + 1), "self-loop"));
        }
        let day: i64 = if with_days {
            parts[2].parse().map_err(|_| {
                format_err(
                    edges_path,
                    Some(lineno + 1),
                    format!("day is not an integer: '{}'", parts[2]),
                )
            })?
        } else {
            0
        };
        if neighbors[a].contains(&b) {
            return Err(format_err(edges_path, Some(lineno + 1), "duplicate edge"));
        }
        neighbors[a].push(b);
        neighbors[b].push(a);
        days[a].push(day);
        days[b].push(day);
    }
    for i in 0..n {
        let mut order: Vec<usize> = (0..neighbors[i].len()).collect();
        order.sort_by_key(|&k| neighbors[i][k]);
        neighbors[i] = order.iter().map(|&k| neighbors[i][k]).collect();
        days[i] = order.iter().map(|&k| days[i][k]).collect();
    }
    Ok(ContactNetwork {
        ids,
        features,
        neighbors,
        contact_days: with_days.then_some(days),
        roles,
    })
}

/// Ground-truth table: `id,y,z_true,eta_true,z_observed`.
pub fn write_ground_truth(path: &Path, network: &ContactNetwork, truth: &GroundTruth) -> Result<()> {
    let mut out = String::from("id,y,z_true,eta_true,z_observed\n");
    for i in 0..network.node_count() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            network.ids[i],
            truth.y[i],
            truth.z_true[i],
            truth.eta_true[i],
            u8::from(truth.z_observed_mask[i])
        ));
    }
    write_atomic(path, &out)
}

/// Read ground truth aligned to a network's node order.
pub fn read_ground_truth(path: &Path, network: &ContactNetwork) -> Result<GroundTruth> {
    let lines = read_lines(path)?;
    let header = lines
        .first()
        .ok_or_else(|| format_err(path, None, "empty file"))?;
    if header != "id,y,z_true,eta_true,z_observed" {
        return Err(format_err(path, Some(1), "unexpected header"));
    }
    let index: BTreeMap<&str, usize> = network
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let n = network.node_count();
    let mut truth = GroundTruth {
        z_true: vec![0; n],
        eta_true: vec![0; n],
        theta_true: vec![0.0; n],
        y: vec![0; n],
        susceptible: vec![0; n],
        z_observed_mask: vec![false; n],
    };
    let mut seen = vec![false; n];
    for (lineno, line) in lines.iter().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(format_err(path, Some(lineno + 1), "expected 5 columns"));
        }
        let &i = index.get(parts[0]).ok_or_else(|| {
            format_err(path, Some(lineno + 1), format!("unknown id '{}'", parts[0]))
        })?;
        let bit = |raw: &str, col: &str| -> Result<u8> {
            match raw {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(format_err(
                    path,
                    Some(lineno + 1),
                    format!("column {col} must be 0 or 1, found '{other}'"),
                )),
            }
        };
        truth.y[i] = bit(parts[1], "y")?;
        truth.z_true[i] = bit(parts[2], "z_true")?;
        truth.eta_true[i] = bit(parts[3], "eta_true")?;
        truth.z_observed_mask[i] = bit(parts[4], "z_observed")? == 1;
        seen[i] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(format_err(
            path,
            None,
            format!("no ground-truth row for node '{}'", network.ids[missing]),
        ));
    }
    Ok(truth)
}

/// One ground-truth row as stored on disk, keyed by node id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthRow {
    pub id: String,
    pub y: u8,
    pub z_true: u8,
    pub eta_true: u8,
    pub z_observed: bool,
}

/// Read a ground-truth table standalone, without a network to align to.
pub fn read_ground_truth_rows(path: &Path) -> Result<Vec<GroundTruthRow>> {
    let lines = read_lines(path)?;
    let header = lines
        .first()
        .ok_or_else(|| format_err(path, None, "empty file"))?;
    if header != "id,y,z_true,eta_true,z_observed" {
        return Err(format_err(path, Some(1), "unexpected header"));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.iter().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(format_err(path, Some(lineno + 1), "expected 5 columns"));
        }
        let bit = |raw: &str, col: &str| -> Result<u8> {
            match raw {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(format_err(
                    path,
                    Some(lineno + 1),
                    format!("column {col} must be 0 or 1, found '{other}'"),
                )),
            }
        };
        rows.push(GroundTruthRow {
            id: parts[0].to_string(),
            y: bit(parts[1], "y")?,
            z_true: bit(parts[2], "z_true")?,
            eta_true: bit(parts[3], "eta_true")?,
            z_observed: bit(parts[4], "z_observed")? == 1,
        });
    }
    Ok(rows)
}

/// Write a full cohort under a directory with a shared prefix.
pub fn write_cohort(dir: &Path, prefix: &str, cohort: &Cohort) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir)?;
    let nodes = dir.join(format!("{prefix}_nodes.csv"));
    let edges = dir.join(format!("{prefix}_edges.csv"));
    let truth = dir.join(format!("{prefix}_truth.csv"));
    write_nodes(&nodes, &cohort.network)?;
    write_edges(&edges, &cohort.network)?;
    write_ground_truth(&truth, &cohort.network, &cohort.truth)?;
    Ok(vec![nodes, edges, truth])
}

/// Contact log: `main_id,neighbor_id,day,channel`.
pub fn read_contacts(path: &Path) -> Result<Vec<ContactEvent>> {
    let lines = read_lines(path)?;
    let header = lines
        .first()
        .ok_or_else(|| format_err(path, None, "empty file"))?;
    if header != "main_id,neighbor_id,day,channel" {
        return Err(format_err(path, Some(1), "unexpected header"));
    }
    let mut events = Vec::new();
    for (lineno, line) in lines.iter().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(format_err(path, Some(lineno + 1), "expected 4 columns"));
        }
        let day: i64 = parts[2].parse().map_err(|_| {
            format_err(
                path,
                Some(lineno + 1),
                format!("day is not an integer: '{}'", parts[2]),
            )
        })?;
        let channel = ContactChannel::parse(parts[3])
            .map_err(|e| format_err(path, Some(lineno + 1), e.to_string()))?;
        if parts[0] == parts[1] {
            return Err(format_err(
                path,
                Some(lineno + 1),
                "main_id equals neighbor_id",
            ));
        }
        events.push(ContactEvent {
            main_id: parts[0].to_string(),
            neighbor_id: parts[1].to_string(),
            day,
            channel,
        });
    }
    Ok(events)
}

/// On-disk weight document.
#[derive(Debug, Serialize, Deserialize)]
struct WeightsFile {
    u: Vec<f64>,
    w_sus: Vec<f64>,
    w_e: f64,
    feature_dim: usize,
    format_version: u32,
}

pub fn write_weights(path: &Path, weights: &PalsWeights) -> Result<()> {
    weights.validate()?;
    let doc = WeightsFile {
        u: weights.u.clone(),
        w_sus: weights.w_sus.clone(),
        w_e: weights.w_e,
        feature_dim: weights.feature_dim(),
        format_version: 1,
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_atomic(path, &text)
}

pub fn read_weights(path: &Path) -> Result<PalsWeights> {
    let text = fs::read_to_string(path)?;
    let doc: WeightsFile = serde_json::from_str(&text)?;
    if doc.format_version != 1 {
        return Err(format_err(
            path,
            None,
            format!("unsupported format_version {}", doc.format_version),
        ));
    }
    if doc.u.len() != doc.feature_dim || doc.w_sus.len() != doc.feature_dim {
        return Err(format_err(path, None, "feature_dim disagrees with weights"));
    }
    let weights = PalsWeights {
        u: doc.u,
        w_sus: doc.w_sus,
        w_e: doc.w_e,
    };
    weights.validate()?;
    Ok(weights)
}

/// Scores table: `id,score`.
pub fn write_scores(path: &Path, ids: &[String], scores: &[f64]) -> Result<()> {
    let mut out = String::from("id,score\n");
    for (id, s) in ids.iter().zip(scores) {
        out.push_str(&format!("{id},{s}\n"));
    }
    write_atomic(path, &out)
}

pub fn read_scores(path: &Path) -> Result<Vec<(String, f64)>> {
    let lines = read_lines(path)?;
    let header = lines
        .first()
        .ok_or_else(|| format_err(path, None, "empty file"))?;
    if header != "id,score" {
        return Err(format_err(path, Some(1), "unexpected header"));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.iter().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let (id, raw) = line.split_once(',').ok_or_else(|| {
            format_err(path, Some(lineno + 1), "expected 2 columns")
        })?;
        let score: f64 = raw.parse().map_err(|_| {
            format_err(
                path,
                Some(lineno + 1),
                format!("score is not numeric: '{raw}'"),
            )
        })?;
        out.push((id.to_string(), score));
    }
    Ok(out)
}

/// One aggregated metric row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub experiment: String,
    pub grid_value: f64,
    pub model: String,
    pub metric: String,
    pub summary: MetricSummary,
}

/// One per-run metric value.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub experiment: String,
    pub grid_value: f64,
    pub model: String,
    pub metric: String,
    pub run: usize,
    pub value: f64,
}

pub const METRICS_HEADER: &str = "experiment,grid_value,model,metric,mean,ci_low,ci_high,n_runs";
pub const CURVES_HEADER: &str = "experiment,grid_value,model,metric,run,value";

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.experiment,
            r.grid_value,
            r.model,
            r.metric,
            r.summary.mean,
            r.summary.ci_low,
            r.summary.ci_high,
            r.summary.n_runs
        ));
    }
    write_atomic(path, &out)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let lines = read_lines(path)?;
    let header = lines
        .first()
        .ok_or_else(|| format_err(path, None, "empty file"))?;
    if header != METRICS_HEADER {
        return Err(format_err(path, Some(1), "unexpected header"));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.iter().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(format_err(path, Some(lineno + 1), "expected 8 columns"));
        }
        let num = |raw: &str, col: &str| -> Result<f64> {
            raw.parse().map_err(|_| {
                format_err(
                    path,
                    Some(lineno + 1),
                    format!("column {col} is not numeric: '{raw}'"),
                )
            })
        };
        rows.push(MetricsRow {
            experiment: parts[0].to_string(),
            grid_value: num(parts[1], "grid_value")?,
            model: parts[2].to_string(),
            metric: parts[3].to_string(),
            summary: MetricSummary {
                mean: num(parts[4], "mean")?,
                ci_low: num(parts[5], "ci_low")?,
                ci_high: num(parts[6], "ci_high")?,
                n_runs: num(parts[7], "n_runs")? as usize,
            },
        });
    }
    Ok(rows)
}

pub fn write_curves(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.experiment, r.grid_value, r.model, r.metric, r.run, r.value
        ));
    }
    write_atomic(path, &out)
}

/// ELBO trace: `round,elbo`, round 0 being the initial state.
pub fn write_elbo_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut out = String::from("round,elbo\n");
    for (round, v) in trace.iter().enumerate() {
        out.push_str(&format!("{round},{v}\n"));
    }
    write_atomic(path, &out)
}

/// Variational-state diagnostics: per-node gamma and pi, per-edge phi.
pub fn write_state_diagnostics(
    path: &Path,
    network: &ContactNetwork,
    state: &crate::model::VariationalState,
) -> Result<()> {
    let mut out = String::from("kind,node,neighbor,first,second\n");
    for i in 0..network.node_count() {
        if !network.is_main(i) {
            continue;
        }
        let (g1, g2) = state.gamma[i];
        out.push_str(&format!("gamma,{},,{g1},{g2}\n", network.ids[i]));
        let (p1, p2) = state.pi[i];
        out.push_str(&format!("pi,{},,{p1},{p2}\n", network.ids[i]));
        for (pos, &j) in network.neighbors[i].iter().enumerate() {
            let (f1, f2) = state.phi[i][pos];
            out.push_str(&format!(
                "phi,{},{},{f1},{f2}\n",
                network.ids[i], network.ids[j]
            ));
        }
    }
    write_atomic(path, &out)
}
