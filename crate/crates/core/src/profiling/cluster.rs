//! Agglomerative hierarchical clustering over a player distance matrix,
//! with Newick serialization of the resulting dendrogram.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiling::DistanceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Complete,
    Average,
    Single,
}

impl Linkage {
    pub fn parse(s: &str) -> Option<Linkage> {
        match s {
            "complete" => Some(Linkage::Complete),
            "average" => Some(Linkage::Average),
            "single" => Some(Linkage::Single),
            _ => None,
        }
    }
}

/// One agglomeration step. Cluster ids follow the usual convention:
/// leaves are `0..m`, the cluster created by merge `t` gets id `m + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
    pub linkage: Linkage,
}

/// Naive O(m^3) agglomeration: repeatedly merge the closest cluster pair,
/// ties broken by the lexicographically smallest id pair, updating
/// inter-cluster distances per the linkage rule.
pub fn hierarchical_cluster(
    distances: &DistanceMatrix,
    labels: &[String],
    linkage: Linkage,
) -> Result<Dendrogram> {
    let m = distances.m;
    if labels.len() != m {
        return Err(Error::InvalidConfig(format!(
            "{} labels for {m} players",
            labels.len()
        )));
    }
    if m < 2 {
        return Err(Error::InvalidConfig("need at least 2 leaves".into()));
    }

    struct Cluster {
        id: usize,
        size: usize,
    }
    let mut active: Vec<Cluster> = (0..m).map(|id| Cluster { id, size: 1 }).collect();
    // dist[i][j]: distance between active clusters i and j (by position).
    let mut dist: Vec<Vec<f64>> = (0..m)
        .map(|a| (0..m).map(|b| distances.get(a, b)).collect())
        .collect();
    let mut merges = Vec::with_capacity(m - 1);

    for step in 0..(m - 1) {
        // Closest pair, ties by smallest (id, id).
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..active.len() {
            for j in (i + 1)..active.len() {
                let d = dist[i][j];
                let better = match &best {
                    None => true,
                    Some((bd, bi, bj)) => {
                        let key = (active[i].id.min(active[j].id), active[i].id.max(active[j].id));
                        let best_key =
                            (active[*bi].id.min(active[*bj].id), active[*bi].id.max(active[*bj].id));
                        d < *bd || (d == *bd && key < best_key)
                    }
                };
                if better {
                    best = Some((d, i, j));
                }
            }
        }
        let (height, i, j) = best.expect("at least two active clusters");
        let (id_i, id_j) = (active[i].id, active[j].id);
        merges.push(Merge {
            left: id_i.min(id_j),
            right: id_i.max(id_j),
            height,
        });

        // Lance-Williams update against every other active cluster.
        let (size_i, size_j) = (active[i].size as f64, active[j].size as f64);
        let mut new_row = Vec::with_capacity(active.len() - 2);
        for k in 0..active.len() {
            if k == i || k == j {
                continue;
            }
            let dik = dist[i][k];
            let djk = dist[j][k];
            let d = match linkage {
                Linkage::Complete => dik.max(djk),
                Linkage::Single => dik.min(djk),
                Linkage::Average => (size_i * dik + size_j * djk) / (size_i + size_j),
            };
            new_row.push(d);
        }

        // Remove positions j then i (j > i), append the merged cluster.
        let merged = Cluster {
            id: m + step,
            size: active[i].size + active[j].size,
        };
        active.remove(j);
        active.remove(i);
        for row in dist.iter_mut() {
            row.remove(j);
            row.remove(i);
        }
        dist.remove(j);
        dist.remove(i);
        active.push(merged);
        for (k, row) in dist.iter_mut().enumerate() {
            row.push(new_row[k]);
        }
        new_row.push(0.0);
        dist.push(new_row);
    }

    Ok(Dendrogram {
        leaves: labels.to_vec(),
        merges,
        linkage,
    })
}

impl Dendrogram {
    /// Height of the merge that created a cluster id (0 for leaves).
    fn height_of(&self, id: usize) -> f64 {
        let m = self.leaves.len();
        if id < m {
            0.0
        } else {
            self.merges[id - m].height
        }
    }

    /// Newick serialization with branch lengths equal to the height gap
    /// between a node and its parent merge, so root-to-leaf path lengths
    /// equal the root height.
    pub fn to_newick(&self) -> String {
        let m = self.leaves.len();
        let root = m + self.merges.len() - 1;
        let mut out = String::new();
        self.write_newick(root, &mut out);
        out.push(';');
        out
    }

    fn write_newick(&self, id: usize, out: &mut String) {
        let m = self.leaves.len();
        if id < m {
            out.push_str(&sanitize_label(&self.leaves[id]));
            return;
        }
        let merge = &self.merges[id - m];
        out.push('(');
        self.write_newick(merge.left, out);
        out.push(':');
        out.push_str(&format_height(merge.height - self.height_of(merge.left)));
        out.push(',');
        self.write_newick(merge.right, out);
        out.push(':');
        out.push_str(&format_height(merge.height - self.height_of(merge.right)));
        out.push(')');
    }
}

fn format_height(h: f64) -> String {
    format!("{:.9}", h)
}

fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| match c {
            '(' | ')' | ',' | ':' | ';' | ' ' | '\'' | '"' => '_',
            other => other,
        })
        .collect()
}
