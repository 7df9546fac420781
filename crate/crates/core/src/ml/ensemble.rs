use rand::Rng;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, Tree, TreeParams};
use super::{rng_for, Dataset, MlError, ModelBody, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per split; defaults to `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            mtry: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceParams {
    pub n_members: usize,
    /// Share of the features each member sees, rounded up.
    pub subspace_fraction: f64,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for SubspaceParams {
    fn default() -> Self {
        SubspaceParams {
            n_members: 10,
            subspace_fraction: 0.5,
            max_depth: None,
            min_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceMember {
    /// Sorted feature indices this member was trained on.
    pub features: Vec<usize>,
    pub tree: Tree,
}

fn check_trainable(data: &Dataset) -> Result<(), MlError> {
    if data.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    if data.n_features() == 0 {
        return Err(MlError::InvalidDataset("no features".into()));
    }
    Ok(())
}

/// Bootstrap-aggregated CART trees with random feature candidates per split.
pub fn train_random_forest(data: &Dataset, params: &ForestParams) -> Result<TrainedModel, MlError> {
    check_trainable(data)?;
    if params.n_trees == 0 {
        return Err(MlError::BadParameter("n_trees must be positive".into()));
    }
    let p = data.n_features();
    let mtry = params
        .mtry
        .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
        .clamp(1, p);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        mtry: Some(mtry),
    };
    let all_features: Vec<usize> = (0..p).collect();
    let n = data.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(params.seed, i as u64);
            let bag: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            fit_tree(
                &data.rows,
                &data.labels,
                data.n_classes(),
                &bag,
                &all_features,
                tree_params,
                &mut rng,
            )
        })
        .collect();
    Ok(TrainedModel::new(
        data,
        ModelBody::RandomForest {
            params: params.clone(),
            trees,
        },
    ))
}

/// Ensemble of full-data CART trees, each restricted to a random feature subset.
pub fn train_random_subspace(data: &Dataset, params: &SubspaceParams) -> Result<TrainedModel, MlError> {
    check_trainable(data)?;
    if params.n_members == 0 {
        return Err(MlError::BadParameter("n_members must be positive".into()));
    }
    if !(params.subspace_fraction > 0.0 && params.subspace_fraction <= 1.0) {
        return Err(MlError::BadParameter(format!(
            "subspace_fraction {} outside (0, 1]",
            params.subspace_fraction
        )));
    }
    let p = data.n_features();
    let width = ((params.subspace_fraction * p as f64).ceil() as usize).clamp(1, p);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        mtry: None,
    };
    let everyone: Vec<usize> = (0..data.len()).collect();
    let members = (0..params.n_members)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(params.seed, i as u64);
            let mut features: Vec<usize> = sample(&mut rng, p, width).into_iter().collect();
            features.sort_unstable();
            let tree = fit_tree(
                &data.rows,
                &data.labels,
                data.n_classes(),
                &everyone,
                &features,
                tree_params,
                &mut rng,
            );
            SubspaceMember { features, tree }
        })
        .collect();
    Ok(TrainedModel::new(
        data,
        ModelBody::RandomSubspace {
            params: params.clone(),
            members,
        },
    ))
}
