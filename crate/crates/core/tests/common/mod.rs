//! Shared test helpers: random frameworks, a flat bottom-up scoring
//! oracle, and an in-process API server.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};
use std::thread;

use isol::scoring::AnswerSet;
use isol::service::{self, ServiceConfig};
use isol::sessions::Store;
use isol::taxonomy::{FrameworkDefinition, FrameworkNode, GradingScale};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape limits for generated frameworks. Depth counts domain = 1.
#[derive(Debug, Clone, Copy)]
pub struct TreeShape {
    pub depth: usize,
    pub max_fan_out: usize,
}

/// A valid random framework. The first child at every level is an
/// aggregate until `depth`, so the tree always reaches full depth.
pub fn random_framework(rng: &mut impl Rng, shape: TreeShape) -> FrameworkDefinition {
    let domain_count = rng.random_range(1..=shape.max_fan_out);
    let domains = (0..domain_count)
        .map(|i| random_node(rng, format!("d{i}"), 1, shape, i == 0))
        .collect();
    FrameworkDefinition {
        id: "random".into(),
        name: "Random".into(),
        version: "1".into(),
        scale: GradingScale::default(),
        domains,
    }
}

fn random_node(rng: &mut impl Rng, id: String, level: usize, shape: TreeShape, spine: bool) -> FrameworkNode {
    let aggregate = level < shape.depth && (level == 1 || spine || rng.random_bool(0.55));
    if !aggregate {
        return FrameworkNode::leaf(id.clone(), format!("leaf {id}"), None, format!("question {id}?"));
    }
    let fan_out = rng.random_range(1..=shape.max_fan_out);
    let children = (0..fan_out)
        .map(|i| random_node(rng, format!("{id}.{i}"), level + 1, shape, spine && i == 0))
        .collect();
    FrameworkNode::aggregate(id.clone(), format!("node {id}"), None, children)
}

pub fn seeded_framework(seed: u64, shape: TreeShape) -> FrameworkDefinition {
    random_framework(&mut ChaCha8Rng::seed_from_u64(seed), shape)
}

/// Grade every leaf uniformly at random on the framework's scale.
pub fn random_answers(rng: &mut impl Rng, def: &FrameworkDefinition) -> AnswerSet {
    let max = def.scale.max_value();
    let mut set = AnswerSet::new(&def.id);
    for leaf in def.leaves() {
        set.insert(leaf.id.clone(), rng.random_range(0..=max));
    }
    set
}

/// One row of the flattened tree: parent index (None for domains) and the
/// grade for answered leaves.
struct FlatNode {
    id: String,
    parent: Option<usize>,
    is_leaf: bool,
    grade: Option<i64>,
}

fn flatten(def: &FrameworkDefinition, answers: &AnswerSet) -> Vec<FlatNode> {
    let mut rows = Vec::new();
    let mut stack: Vec<(&FrameworkNode, Option<usize>)> =
        def.domains.iter().rev().map(|d| (d, None)).collect();
    while let Some((node, parent)) = stack.pop() {
        let index = rows.len();
        rows.push(FlatNode {
            id: node.id.clone(),
            parent,
            is_leaf: node.is_leaf(),
            grade: answers.answers.get(&node.id).copied(),
        });
        for child in node.children().iter().rev() {
            stack.push((child, Some(index)));
        }
    }
    rows
}

/// Brute-force scores: walk the flat pre-order list backwards so every
/// child is finished before its parent, accumulating running sums and
/// counts. Unanswered subtrees contribute nothing. Returns node id ->
/// achievement, plus the overall score under the key `""`.
pub fn oracle_scores(def: &FrameworkDefinition, answers: &AnswerSet) -> BTreeMap<String, f64> {
    let rows = flatten(def, answers);
    let mut sum = vec![0.0f64; rows.len()];
    let mut count = vec![0usize; rows.len()];
    let mut root_sum = 0.0;
    let mut root_count = 0usize;
    let mut out = BTreeMap::new();
    for i in (0..rows.len()).rev() {
        let row = &rows[i];
        let value = if row.is_leaf {
            row.grade.map(|g| g as f64)
        } else if count[i] > 0 {
            Some(sum[i] / count[i] as f64)
        } else {
            None
        };
        let Some(value) = value else { continue };
        out.insert(row.id.clone(), value);
        match row.parent {
            Some(p) => {
                sum[p] += value;
                count[p] += 1;
            }
            None => {
                root_sum += value;
                root_count += 1;
            }
        }
    }
    if root_count > 0 {
        out.insert(String::new(), root_sum / root_count as f64);
    }
    out
}

/// Largest |engine - oracle| over every scored node; panics if the two
/// disagree on which nodes have a score.
pub fn max_oracle_gap(result: &isol::AggregateResult, oracle: &BTreeMap<String, f64>) -> f64 {
    let mut gap = 0.0f64;
    let mut scored = 0;
    let nodes = std::iter::once((String::new(), &result.root)).chain(
        result
            .domains()
            .iter()
            .flat_map(|d| d.iter())
            .map(|n| (n.node_id.clone(), n)),
    );
    for (key, node) in nodes {
        match (node.achievement, oracle.get(&key)) {
            (Some(a), Some(b)) => {
                gap = gap.max((a - b).abs());
                scored += 1;
            }
            (None, None) => {}
            (a, b) => panic!("node {key:?}: engine {a:?} vs oracle {b:?}"),
        }
    }
    assert_eq!(scored, oracle.len(), "oracle scored nodes the engine did not visit");
    gap
}

/// Serve the API for `store` on an ephemeral port; returns the base URL.
/// The server thread lives until the test process exits.
pub fn spawn_server(store: Store) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let app = service::router(Arc::new(RwLock::new(store)), &ServiceConfig::default());
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

/// A running `isol serve` child process, killed on drop.
pub struct ServeProcess {
    pub child: std::process::Child,
    pub base: String,
}

impl ServeProcess {
    /// Start `isol serve` on a free port and wait for its listening line.
    pub fn start(data_dir: &std::path::Path, extra: &[&str]) -> Self {
        use std::io::{BufRead, BufReader};
        use std::process::{Command, Stdio};

        let port = free_port();
        let mut child = Command::new(env!("CARGO_BIN_EXE_isol"))
            .args(["serve", "--port", &port.to_string(), "--data-dir"])
            .arg(data_dir)
            .args(extra)
            .env("ISOL_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let stdout = child.stdout.take().unwrap();
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line).unwrap();
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected serve output: {line:?}"))
            .to_owned();
        Self { child, base }
    }

    pub fn stop(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for ServeProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

/// Run the `isol` binary to completion; returns (exit code, stdout, stderr).
pub fn run_isol<I, S>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_isol"))
        .args(args)
        .env("ISOL_LOG", "warn")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}
