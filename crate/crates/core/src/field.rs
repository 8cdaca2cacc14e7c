use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    U,
    V,
    LogU,
    Eigenfunction,
    Distance,
    Sample,
}

impl Quantity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::U => "u",
            Quantity::V => "v",
            Quantity::LogU => "log_u",
            Quantity::Eigenfunction => "eigenfunction",
            Quantity::Distance => "distance",
            Quantity::Sample => "sample",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    /// Scaled so that the maximum over the mesh is one.
    UnitMax,
}

/// Nodal values on the vertices of a [`crate::domain::TriangleMesh`].
///
/// Non-finite entries mark vertices where the quantity is undefined
/// (the boundary of `u^((1-p)/2)` for `p >= 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub quantity: Quantity,
    pub p: f64,
    pub normalization: Normalization,
}

impl ScalarField {
    pub fn new(values: Vec<f64>, quantity: Quantity, p: f64) -> Self {
        ScalarField { values, quantity, p, normalization: Normalization::None }
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.values[i].is_finite()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Copy scaled so that the maximum is one.
    pub fn normalized(&self) -> ScalarField {
        let m = self.max();
        ScalarField {
            values: self.values.iter().map(|v| v / m).collect(),
            quantity: self.quantity,
            p: self.p,
            normalization: Normalization::UnitMax,
        }
    }
}
