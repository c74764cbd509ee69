use std::path::Path;

use serde::Serialize;

use super::svd::ProbeSvd;
use crate::error::{Error, Result};
use crate::hsd_store::{l2_normalize, HiddenStateDump};
use crate::scalar::Scalar;

const ORTHO_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedPoint {
    pub sample_id: String,
    pub x: f64,
    pub y: f64,
    pub class: usize,
}

/// 2-D coordinates of hidden states in the plane of the top two right
/// singular vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionReport {
    pub layer: usize,
    pub singular_values: [f64; 3],
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub points: Vec<ProjectedPoint>,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Coordinates `(h·v1, h·v2)` per state. `states` are rows of length `d`.
pub fn project_hidden_states<T: Scalar>(
    v1: &[T],
    v2: &[T],
    states: &[Vec<T>],
    classes: &[usize],
    sample_ids: &[String],
) -> Result<Vec<ProjectedPoint>> {
    let d = v1.len();
    if v2.len() != d || states.iter().any(|h| h.len() != d) {
        return Err(Error::validation("projection vectors and states differ in dimension"));
    }
    if states.len() != classes.len() || states.len() != sample_ids.len() {
        return Err(Error::validation("states, classes and ids differ in length"));
    }
    let tol = T::c(ORTHO_TOL);
    if (dot(v1, v1) - T::one()).abs() > tol || (dot(v2, v2) - T::one()).abs() > tol || dot(v1, v2).abs() > tol {
        return Err(Error::validation("projection vectors are not orthonormal"));
    }
    Ok(states
        .iter()
        .zip(classes)
        .zip(sample_ids)
        .map(|((h, &class), id)| ProjectedPoint {
            sample_id: id.clone(),
            x: dot(h, v1).to_f64_lossy(),
            y: dot(h, v2).to_f64_lossy(),
            class,
        })
        .collect())
}

impl ProjectionReport {
    /// Projects the L2-normalized states of a 1-based dump layer.
    pub fn from_dump(
        dump: &HiddenStateDump,
        layer: usize,
        svd: &ProbeSvd<f64>,
        classes: &[usize],
        sample_ids: &[String],
    ) -> Result<Self> {
        if layer == 0 || layer > dump.n_layers() {
            return Err(Error::validation(format!("layer {layer} outside 1..={}", dump.n_layers())));
        }
        let states = (0..dump.n_samples())
            .map(|i| {
                let h: Vec<f64> = dump.row(layer - 1, i).iter().map(|&v| v as f64).collect();
                l2_normalize(&h)
            })
            .collect::<Result<Vec<_>>>()?;
        let points = project_hidden_states(svd.v1(), svd.v2(), &states, classes, sample_ids)?;
        Ok(ProjectionReport {
            layer,
            singular_values: svd.singular_values,
            v1: svd.v1().to_vec(),
            v2: svd.v2().to_vec(),
            points,
        })
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    layer: usize,
    sample_id: &'a str,
    x: f64,
    y: f64,
    class: usize,
}

/// CSV with columns `layer, sample_id, x, y, class`.
pub fn write_projection_csv(path: &Path, reports: &[ProjectionReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        for p in &r.points {
            w.serialize(CsvRow {
                layer: r.layer,
                sample_id: &p.sample_id,
                x: p.x,
                y: p.y,
                class: p.class,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        let e1 = vec![1.0, 0.0, 0.0];
        let e2 = vec![0.0, 1.0, 0.0];
        let ids = vec!["a".to_string(), "b".to_string()];
        let pts = project_hidden_states(&e1, &e2, &[vec![0.6, 0.8, 0.0], vec![0.0, 0.0, 1.0]], &[0, 2], &ids).unwrap();
        assert_eq!((pts[0].x, pts[0].y), (0.6, 0.8));
        assert_eq!((pts[1].x, pts[1].y), (0.0, 0.0));
        assert_eq!(pts[1].class, 2);
    }

    #[test]
    fn projection_errors() {
        let e1 = vec![1.0, 0.0];
        let ids = vec!["a".to_string()];
        assert!(project_hidden_states(&e1, &e1, &[vec![1.0, 0.0]], &[0], &ids).is_err());
        assert!(project_hidden_states(&e1, &[0.0, 1.0], &[vec![1.0, 0.0, 0.0]], &[0], &ids).is_err());
    }
}
