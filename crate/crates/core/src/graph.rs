//! Directed weighted communication graphs per game, with the centrality
//! features used by the graph-aware state encoding.
//!
//! Edge u->v carries the number of messages u sent v with turn <= cutoff.
//! Centralities are deterministic: fixed uniform initial vectors, fixed
//! iteration order, no randomness.

use std::collections::BTreeMap;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 1000;

/// Directed weighted player-communication graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    pub nodes: Vec<String>,
    /// Dense weighted adjacency, adj[u][v] = messages u sent v.
    pub adj: Vec<Vec<f64>>,
    pub cutoff: u32,
}

impl CommGraph {
    pub fn node_index(&self, player: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == player)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_weight(&self, from: &str, to: &str) -> f64 {
        match (self.node_index(from), self.node_index(to)) {
            (Some(u), Some(v)) => self.adj[u][v],
            _ => 0.0,
        }
    }
}

/// Per-node centrality scores. Eigen, authority, and hub are
/// max-normalized; degrees are weighted sums.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CentralityScores {
    pub eigen: BTreeMap<String, f64>,
    pub authority: BTreeMap<String, f64>,
    pub hub: BTreeMap<String, f64>,
    pub in_degree: BTreeMap<String, f64>,
    pub out_degree: BTreeMap<String, f64>,
}

impl CentralityScores {
    pub fn for_node(&self, player: &str) -> [f64; 5] {
        let get = |m: &BTreeMap<String, f64>| m.get(player).copied().unwrap_or(0.0);
        [
            get(&self.eigen),
            get(&self.authority),
            get(&self.hub),
            get(&self.in_degree),
            get(&self.out_degree),
        ]
    }
}

/// Build the communication graph of one game, counting messages up to and
/// including the cutoff turn. All game players appear as nodes; isolated
/// nodes are allowed.
pub fn build_graph(corpus: &Corpus, game_id: &str, cutoff: u32) -> Result<CommGraph> {
    let game = corpus
        .games
        .get(game_id)
        .ok_or_else(|| Error::Validation(format!("unknown game {game_id:?}")))?;
    let nodes: Vec<String> = game.players.iter().cloned().collect();
    let index: BTreeMap<&str, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut adj = vec![vec![0.0; nodes.len()]; nodes.len()];
    for thread in game.threads.values() {
        for msg in &thread.messages {
            if msg.turn <= cutoff {
                let u = index[msg.sender_id.as_str()];
                let v = index[msg.recipient_id.as_str()];
                adj[u][v] += 1.0;
            }
        }
    }
    Ok(CommGraph { nodes, adj, cutoff })
}

fn max_normalize(scores: &mut [f64]) {
    let max = scores.iter().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        for s in scores.iter_mut() {
            *s /= max;
        }
    }
}

/// Eigenvector centrality by power iteration on the symmetrized adjacency
/// (directed variant available). Max-normalized; isolated nodes score 0.
pub fn eigen_centrality(graph: &CommGraph, directed: bool) -> BTreeMap<String, f64> {
    let n = graph.n_nodes();
    if n == 0 {
        return BTreeMap::new();
    }
    let mut a = vec![vec![0.0; n]; n];
    for u in 0..n {
        for v in 0..n {
            a[u][v] = if directed {
                graph.adj[u][v]
            } else {
                graph.adj[u][v] + graph.adj[v][u]
            };
        }
    }
    // Shift by the max row sum so the dominant eigenvalue is strictly
    // largest in magnitude (bipartite graphs oscillate otherwise). The
    // shift leaves eigenvectors unchanged.
    let shift = a
        .iter()
        .map(|row| row.iter().sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let isolated: Vec<bool> = (0..n)
        .map(|u| (0..n).all(|v| a[u][v] == 0.0 && a[v][u] == 0.0))
        .collect();
    if isolated.iter().all(|&i| i) {
        return graph.nodes.iter().map(|p| (p.clone(), 0.0)).collect();
    }
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..MAX_ITERATIONS {
        let mut w = vec![0.0; n];
        for (u, row) in a.iter().enumerate() {
            let mut acc = shift * v[u];
            for (x, &weight) in row.iter().enumerate() {
                acc += weight * v[x];
            }
            w[u] = acc;
        }
        max_normalize(&mut w);
        let delta = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        v = w;
        if delta <= TOLERANCE {
            break;
        }
    }
    for (u, score) in v.iter_mut().enumerate() {
        if isolated[u] {
            *score = 0.0;
        }
    }
    max_normalize(&mut v);
    graph.nodes.iter().cloned().zip(v).collect()
}

/// HITS mutual-reinforcement iteration on the weighted directed adjacency.
/// Returns (authority, hub), both max-normalized.
pub fn hits(graph: &CommGraph) -> (BTreeMap<String, f64>, BTreeMap<String, f64>) {
    let n = graph.n_nodes();
    if n == 0 {
        return (BTreeMap::new(), BTreeMap::new());
    }
    let mut auth = vec![1.0 / n as f64; n];
    let mut hub = vec![1.0 / n as f64; n];
    for _ in 0..MAX_ITERATIONS {
        let mut new_auth = vec![0.0; n];
        for u in 0..n {
            for v in 0..n {
                new_auth[v] += graph.adj[u][v] * hub[u];
            }
        }
        max_normalize(&mut new_auth);
        let mut new_hub = vec![0.0; n];
        for u in 0..n {
            for v in 0..n {
                new_hub[u] += graph.adj[u][v] * new_auth[v];
            }
        }
        max_normalize(&mut new_hub);
        let delta = auth
            .iter()
            .zip(&new_auth)
            .chain(hub.iter().zip(&new_hub))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        auth = new_auth;
        hub = new_hub;
        if delta <= TOLERANCE {
            break;
        }
    }
    let pack = |scores: Vec<f64>| graph.nodes.iter().cloned().zip(scores).collect();
    (pack(auth), pack(hub))
}

/// Weighted in/out degree per node.
pub fn degree_centrality(graph: &CommGraph) -> (BTreeMap<String, f64>, BTreeMap<String, f64>) {
    let n = graph.n_nodes();
    let mut in_deg = vec![0.0; n];
    let mut out_deg = vec![0.0; n];
    for u in 0..n {
        for v in 0..n {
            out_deg[u] += graph.adj[u][v];
            in_deg[v] += graph.adj[u][v];
        }
    }
    let pack = |scores: Vec<f64>| graph.nodes.iter().cloned().zip(scores).collect();
    (pack(in_deg), pack(out_deg))
}

/// All centralities of one graph.
pub fn centrality_scores(graph: &CommGraph, eigen_directed: bool) -> CentralityScores {
    let eigen = eigen_centrality(graph, eigen_directed);
    let (authority, hub) = hits(graph);
    let (in_degree, out_degree) = degree_centrality(graph);
    CentralityScores { eigen, authority, hub, in_degree, out_degree }
}

/// Per-(game, cutoff) centrality cache. Features for a state at turn t use
/// the graph with cutoff t, so distinct turns share computations here.
#[derive(Debug, Default)]
pub struct CentralityCache {
    cache: BTreeMap<(String, u32), CentralityScores>,
    pub eigen_directed: bool,
}

impl CentralityCache {
    pub fn new(eigen_directed: bool) -> Self {
        Self { cache: BTreeMap::new(), eigen_directed }
    }

    pub fn scores(&mut self, corpus: &Corpus, game_id: &str, cutoff: u32) -> Result<&CentralityScores> {
        let key = (game_id.to_string(), cutoff);
        if !self.cache.contains_key(&key) {
            let graph = build_graph(corpus, game_id, cutoff)?;
            let scores = centrality_scores(&graph, self.eigen_directed);
            self.cache.insert(key.clone(), scores);
        }
        Ok(&self.cache[&key])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;
    use std::io::Cursor;

    fn graph_from(edges: &[(&str, &str, f64)], extra_nodes: &[&str]) -> CommGraph {
        let mut nodes: Vec<String> = edges
            .iter()
            .flat_map(|(u, v, _)| [u.to_string(), v.to_string()])
            .chain(extra_nodes.iter().map(|n| n.to_string()))
            .collect();
        nodes.sort();
        nodes.dedup();
        let n = nodes.len();
        let mut adj = vec![vec![0.0; n]; n];
        for (u, v, w) in edges {
            let ui = nodes.iter().position(|x| x == u).unwrap();
            let vi = nodes.iter().position(|x| x == v).unwrap();
            adj[ui][vi] += w;
        }
        CommGraph { nodes, adj, cutoff: u32::MAX }
    }

    #[test]
    fn build_graph_counts_messages() {
        let line = |t: &str, seq: u32, s: &str, r: &str| {
            format!(
                r#"{{"game_id":"g","thread_id":"{t}","seq":{seq},"sender":"{s}","recipient":"{r}","turn":{seq},"text":"x","sender_score":0,"labels":null}}"#
            )
        };
        let input =
            format!("{}\n{}\n{}\n", line("t", 0, "A", "B"), line("t", 1, "A", "B"), line("t", 2, "B", "A"));
        let corpus = parse_corpus(Cursor::new(input)).unwrap();
        let g = build_graph(&corpus, "g", u32::MAX).unwrap();
        assert_eq!(g.edge_weight("A", "B"), 2.0);
        assert_eq!(g.edge_weight("B", "A"), 1.0);
        // Cutoff before any message: all isolated.
        let g0 = build_graph(&corpus, "g", 0).unwrap();
        assert_eq!(g0.edge_weight("A", "B"), 1.0);
        let empty = {
            let mut c = corpus.clone();
            for m in c.messages_mut() {
                m.turn += 10;
            }
            build_graph(&c, "g", 0).unwrap()
        };
        assert_eq!(empty.edge_weight("A", "B"), 0.0);
    }

    #[test]
    fn eigen_single_isolated_node_is_zero() {
        let g = graph_from(&[], &["v"]);
        let scores = eigen_centrality(&g, false);
        assert_eq!(scores["v"], 0.0);
    }

    #[test]
    fn eigen_reciprocal_pair_both_one() {
        let g = graph_from(&[("a", "b", 1.0), ("b", "a", 1.0)], &[]);
        let scores = eigen_centrality(&g, false);
        assert!((scores["a"] - 1.0).abs() <= 1e-9);
        assert!((scores["b"] - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn eigen_three_path_matches_known_eigenvector() {
        let g = graph_from(&[("a", "b", 1.0), ("b", "c", 1.0)], &[]);
        let scores = eigen_centrality(&g, false);
        assert!((scores["a"] - 0.7071).abs() <= 1e-4, "{scores:?}");
        assert!((scores["b"] - 1.0).abs() <= 1e-4);
        assert!((scores["c"] - 0.7071).abs() <= 1e-4);
    }

    #[test]
    fn hits_single_edge_canonical() {
        let g = graph_from(&[("a", "b", 1.0)], &[]);
        let (auth, hub) = hits(&g);
        assert_eq!(auth["b"], 1.0);
        assert_eq!(auth["a"], 0.0);
        assert_eq!(hub["a"], 1.0);
        assert_eq!(hub["b"], 0.0);
    }

    #[test]
    fn hits_edge_reversal_swaps_roles() {
        let edges = [("a", "b", 2.0), ("b", "c", 1.0), ("a", "c", 3.0)];
        let reversed: Vec<(&str, &str, f64)> =
            edges.iter().map(|&(u, v, w)| (v, u, w)).collect();
        let g = graph_from(&edges, &[]);
        let gr = graph_from(&reversed, &[]);
        let (auth, hub) = hits(&g);
        let (auth_r, hub_r) = hits(&gr);
        for node in &g.nodes {
            assert!((auth[node] - hub_r[node]).abs() <= 1e-9);
            assert!((hub[node] - auth_r[node]).abs() <= 1e-9);
        }
    }

    #[test]
    fn degree_weighted_sums() {
        let g = graph_from(&[("a", "b", 2.0)], &[]);
        let (in_deg, out_deg) = degree_centrality(&g);
        assert_eq!(out_deg["a"], 2.0);
        assert_eq!(in_deg["b"], 2.0);
        assert_eq!(in_deg["a"], 0.0);
    }

    #[test]
    fn scores_invariant_under_weight_scaling() {
        let edges = [("a", "b", 1.0), ("b", "c", 2.0), ("c", "a", 3.0), ("a", "c", 1.0)];
        let scaled: Vec<(&str, &str, f64)> =
            edges.iter().map(|&(u, v, w)| (u, v, 7.5 * w)).collect();
        let g = graph_from(&edges, &[]);
        let gs = graph_from(&scaled, &[]);
        let base = centrality_scores(&g, false);
        let scaled = centrality_scores(&gs, false);
        for node in &g.nodes {
            assert!((base.eigen[node] - scaled.eigen[node]).abs() <= 1e-8);
            assert!((base.authority[node] - scaled.authority[node]).abs() <= 1e-8);
            assert!((base.hub[node] - scaled.hub[node]).abs() <= 1e-8);
        }
    }

    #[test]
    fn scores_equivariant_under_relabeling() {
        let g = graph_from(&[("a", "b", 1.0), ("b", "c", 2.0)], &[]);
        let relabeled = graph_from(&[("x", "y", 1.0), ("y", "z", 2.0)], &[]);
        let s1 = centrality_scores(&g, false);
        let s2 = centrality_scores(&relabeled, false);
        for (old, new) in [("a", "x"), ("b", "y"), ("c", "z")] {
            assert!((s1.eigen[old] - s2.eigen[new]).abs() <= 1e-9);
            assert!((s1.authority[old] - s2.authority[new]).abs() <= 1e-9);
        }
    }
}
