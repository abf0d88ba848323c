//! Portfolio construction (equal weight, inverse-volatility risk parity) and
//! hierarchical roll-up of attribution reports.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionReport, WeightVector};
use crate::error::{IcdError, Result};
use crate::market_data::{slice_window, DateWindow, ReturnPanel};

pub const ROOT_LABEL: &str = "portfolio";

/// `leverage / n` on every asset.
pub fn equal_weights(assets: &[String], leverage: f64) -> Result<WeightVector> {
    if assets.is_empty() {
        return Err(IcdError::config("equal weights need at least one asset"));
    }
    check_leverage(leverage)?;
    let w = leverage / assets.len() as f64;
    WeightVector::new(assets.to_vec(), vec![w; assets.len()])
}

/// Naive risk parity: weights proportional to inverse sample volatility over
/// `window`, scaled so they sum to `leverage`.
pub fn risk_parity_weights(
    panel: &ReturnPanel,
    window: &DateWindow,
    leverage: f64,
) -> Result<WeightVector> {
    check_leverage(leverage)?;
    let slice = slice_window(panel, window)?;
    inverse_vol_weights(&slice, leverage)
}

pub(crate) fn inverse_vol_weights(slice: &ReturnPanel, leverage: f64) -> Result<WeightVector> {
    let n = slice.n_obs() as f64;
    let inverse: Vec<f64> = (0..slice.n_assets())
        .map(|j| {
            let col = slice.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
            if var > 0.0 {
                Ok(1.0 / var.sqrt())
            } else {
                Err(IcdError::data(format!(
                    "`{}` has zero volatility over the window ending {}",
                    slice.assets()[j],
                    slice.last_date()
                )))
            }
        })
        .collect::<Result<_>>()?;
    let total: f64 = inverse.iter().sum();
    WeightVector::new(
        slice.assets().to_vec(),
        inverse.iter().map(|v| leverage * v / total).collect(),
    )
}

fn check_leverage(leverage: f64) -> Result<()> {
    if leverage.is_finite() && leverage > 0.0 {
        Ok(())
    } else {
        Err(IcdError::config(format!(
            "leverage must be positive, got {leverage}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HierarchyNode {
    Group {
        label: String,
        children: Vec<HierarchyNode>,
    },
    Leaf {
        asset: String,
    },
}

/// Labeled grouping of assets. Interior nodes are groups (asset class,
/// region, ...); leaves are assets. Depth may differ between branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyTree {
    /// Names of the group levels below the root, e.g. `["asset_class"]`.
    pub levels: Vec<String>,
    pub root: HierarchyNode,
}

impl HierarchyTree {
    /// Build from `(asset, [level-1 label, level-2 label, ...])` paths.
    ///
    /// Groups and assets keep first-appearance order. A group label may occur
    /// only once per level.
    pub fn from_paths(levels: Vec<String>, paths: &[(String, Vec<String>)]) -> Result<Self> {
        let mut seen_assets: HashMap<&str, ()> = HashMap::new();
        // (depth, label) -> parent path
        let mut parents: HashMap<(usize, &str), &[String]> = HashMap::new();
        let mut root = HierarchyNode::Group {
            label: ROOT_LABEL.into(),
            children: Vec::new(),
        };
        for (asset, path) in paths {
            if seen_assets.insert(asset.as_str(), ()).is_some() {
                return Err(IcdError::config(format!(
                    "asset `{asset}` appears twice in the hierarchy"
                )));
            }
            for (depth, label) in path.iter().enumerate() {
                let parent = &path[..depth];
                match parents.get(&(depth, label.as_str())) {
                    Some(existing) if *existing != parent => {
                        return Err(IcdError::config(format!(
                            "group `{label}` appears under two different parents at level {}",
                            depth + 1
                        )));
                    }
                    _ => {
                        parents.insert((depth, label.as_str()), parent);
                    }
                }
            }
            insert_path(&mut root, path, asset);
        }
        Ok(Self { levels, root })
    }

    /// One-level tree with every asset directly under the root.
    pub fn flat(assets: &[String]) -> Self {
        Self {
            levels: Vec::new(),
            root: HierarchyNode::Group {
                label: ROOT_LABEL.into(),
                children: assets
                    .iter()
                    .map(|a| HierarchyNode::Leaf { asset: a.clone() })
                    .collect(),
            },
        }
    }

    pub fn assets(&self) -> Vec<&str> {
        let mut out = Vec::new();
        collect_assets(&self.root, &mut out);
        out
    }

    /// Group labels from the top level down to the asset's parent.
    pub fn path_of(&self, asset: &str) -> Option<Vec<String>> {
        fn walk(node: &HierarchyNode, asset: &str, trail: &mut Vec<String>) -> bool {
            match node {
                HierarchyNode::Leaf { asset: a } => a == asset,
                HierarchyNode::Group { label, children } => {
                    trail.push(label.clone());
                    if children.iter().any(|c| walk(c, asset, trail)) {
                        return true;
                    }
                    trail.pop();
                    false
                }
            }
        }
        let mut trail = Vec::new();
        walk(&self.root, asset, &mut trail).then(|| trail.split_off(1))
    }
}

fn insert_path(node: &mut HierarchyNode, path: &[String], asset: &str) {
    let HierarchyNode::Group { children, .. } = node else {
        unreachable!("leaves are never descended into")
    };
    match path.split_first() {
        None => children.push(HierarchyNode::Leaf {
            asset: asset.to_owned(),
        }),
        Some((head, rest)) => {
            let pos = children
                .iter()
                .position(|c| matches!(c, HierarchyNode::Group { label, .. } if label == head));
            let idx = pos.unwrap_or_else(|| {
                children.push(HierarchyNode::Group {
                    label: head.clone(),
                    children: Vec::new(),
                });
                children.len() - 1
            });
            insert_path(&mut children[idx], rest, asset);
        }
    }
}

fn collect_assets<'a>(node: &'a HierarchyNode, out: &mut Vec<&'a str>) {
    match node {
        HierarchyNode::Leaf { asset } => out.push(asset),
        HierarchyNode::Group { children, .. } => {
            children.iter().for_each(|c| collect_assets(c, out))
        }
    }
}

/// Attribution totals for a node of the hierarchy.
///
/// A group's totals are the sums of its children's totals taken in child
/// order, so re-adding the serialized children reproduces the parent
/// exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub label: String,
    /// True for asset leaves.
    pub is_asset: bool,
    pub rc: f64,
    pub rc_inh: f64,
    pub rc_corr: f64,
    pub children: Vec<GroupReport>,
}

impl GroupReport {
    /// Visit every group (not asset) node with its depth; the root is depth 0.
    pub fn groups_by_depth(&self) -> Vec<(usize, &GroupReport)> {
        fn walk<'a>(g: &'a GroupReport, depth: usize, out: &mut Vec<(usize, &'a GroupReport)>) {
            if g.is_asset {
                return;
            }
            out.push((depth, g));
            for c in &g.children {
                walk(c, depth + 1, out);
            }
        }
        let mut out = Vec::new();
        walk(self, 0, &mut out);
        out
    }

    pub fn find(&self, label: &str) -> Option<&GroupReport> {
        if self.label == label {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(label))
    }
}

/// Sum attribution up the tree.
pub fn rollup(report: &AttributionReport, tree: &HierarchyTree) -> Result<GroupReport> {
    let tree_assets = tree.assets();
    if let Some(missing) = report
        .rows
        .iter()
        .find(|r| !tree_assets.contains(&r.asset.as_str()))
    {
        return Err(IcdError::config(format!(
            "asset `{}` is missing from the hierarchy",
            missing.asset
        )));
    }
    let rows: HashMap<&str, _> = report.rows.iter().map(|r| (r.asset.as_str(), r)).collect();
    if let Some(extra) = tree_assets.iter().find(|a| !rows.contains_key(*a)) {
        return Err(IcdError::config(format!(
            "hierarchy asset `{extra}` has no attribution row"
        )));
    }

    fn build(
        node: &HierarchyNode,
        rows: &HashMap<&str, &crate::attribution::AttributionRow>,
    ) -> GroupReport {
        match node {
            HierarchyNode::Leaf { asset } => {
                let r = rows[asset.as_str()];
                GroupReport {
                    label: asset.clone(),
                    is_asset: true,
                    rc: r.rc,
                    rc_inh: r.rc_inh,
                    rc_corr: r.rc_corr,
                    children: Vec::new(),
                }
            }
            HierarchyNode::Group { label, children } => {
                let children: Vec<GroupReport> = children.iter().map(|c| build(c, rows)).collect();
                let mut g = GroupReport {
                    label: label.clone(),
                    is_asset: false,
                    rc: 0.0,
                    rc_inh: 0.0,
                    rc_corr: 0.0,
                    children: Vec::new(),
                };
                for c in &children {
                    g.rc += c.rc;
                    g.rc_inh += c.rc_inh;
                    g.rc_corr += c.rc_corr;
                }
                g.children = children;
                g
            }
        }
    }
    Ok(build(&tree.root, &rows))
}
