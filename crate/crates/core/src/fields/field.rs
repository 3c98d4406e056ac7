use super::{FieldError, Grid};

/// Real lattice data on a [`Grid`], `x₁` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Wraps lattice values, rejecting wrong lengths and non-finite entries.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(FieldError::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    /// Samples `f(x₁, x₂)` at every lattice point.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (x1, x2) = grid.point(idx);
                f(x1, x2)
            })
            .collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// Average over the lattice, equal to `(2π)⁻² ∫ f`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lattice quadrature of `∫ f g dx` over `[0, 2π)²`.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let h = self.grid.h();
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * h
            * h
    }
}

/// Two scalar components on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: [ScalarField; 2],
}

impl VectorField {
    pub fn new(c1: ScalarField, c2: ScalarField) -> Result<Self, FieldError> {
        if c1.grid() != c2.grid() {
            return Err(FieldError::GridMismatch);
        }
        Ok(Self {
            components: [c1, c2],
        })
    }

    pub(crate) fn from_pair(c1: ScalarField, c2: ScalarField) -> Self {
        debug_assert_eq!(c1.grid(), c2.grid());
        Self {
            components: [c1, c2],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_pair(ScalarField::zeros(grid), ScalarField::zeros(grid))
    }

    pub fn constant(grid: Grid, c: [f64; 2]) -> Self {
        Self::from_pair(
            ScalarField::constant(grid, c[0]),
            ScalarField::constant(grid, c[1]),
        )
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let (a, b): (Vec<f64>, Vec<f64>) = (0..grid.len())
            .map(|idx| {
                let (x1, x2) = grid.point(idx);
                let v = f(x1, x2);
                (v[0], v[1])
            })
            .unzip();
        Self::from_pair(
            ScalarField::from_values_unchecked(grid, a),
            ScalarField::from_values_unchecked(grid, b),
        )
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.components[0].grid()
    }

    #[inline]
    pub fn component(&self, c: usize) -> &ScalarField {
        &self.components[c]
    }

    pub fn components(&self) -> &[ScalarField; 2] {
        &self.components
    }

    pub fn into_components(self) -> [ScalarField; 2] {
        self.components
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(ScalarField::is_finite)
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self::from_pair(f(&self.components[0]), f(&self.components[1]))
    }

    pub fn zip_components(
        &self,
        other: &Self,
        f: impl Fn(&ScalarField, &ScalarField) -> ScalarField,
    ) -> Self {
        Self::from_pair(
            f(&self.components[0], &other.components[0]),
            f(&self.components[1], &other.components[1]),
        )
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_components(|f| f.scale(c))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_components(other, ScalarField::add)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_components(other, ScalarField::sub)
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        self.zip_components(other, |a, b| a.zip_map(b, |x, y| x + c * y))
    }

    pub fn mean(&self) -> [f64; 2] {
        [self.components[0].mean(), self.components[1].mean()]
    }

    /// Largest pointwise Euclidean length.
    pub fn max_magnitude(&self) -> f64 {
        self.components[0]
            .values()
            .iter()
            .zip(self.components[1].values())
            .fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }

    /// Lattice quadrature of `∫ a·b dx`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.components[0].inner(&other.components[0]) + self.components[1].inner(&other.components[1])
    }

    /// Value at flat lattice index.
    #[inline]
    pub fn at_index(&self, idx: usize) -> [f64; 2] {
        [
            self.components[0].values()[idx],
            self.components[1].values()[idx],
        ]
    }
}

/// Symmetric 2×2 matrix field stored as `(xx, xy, yy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    pub xx: ScalarField,
    pub xy: ScalarField,
    pub yy: ScalarField,
}

impl SymTensorField {
    pub fn new(xx: ScalarField, xy: ScalarField, yy: ScalarField) -> Result<Self, FieldError> {
        if xx.grid() != xy.grid() || xx.grid() != yy.grid() {
            return Err(FieldError::GridMismatch);
        }
        Ok(Self { xx, xy, yy })
    }

    pub fn grid(&self) -> Grid {
        self.xx.grid()
    }

    /// Adds the constant symmetric matrix `[[a11, a12], [a12, a22]]`.
    pub fn add_constant(&self, a: [[f64; 2]; 2]) -> Self {
        Self {
            xx: self.xx.map(|v| v + a[0][0]),
            xy: self.xy.map(|v| v + a[0][1]),
            yy: self.yy.map(|v| v + a[1][1]),
        }
    }

    /// Pointwise matrix–vector product `M(x)·v(x)`.
    pub fn apply(&self, v: &VectorField) -> VectorField {
        let v1 = v.component(0);
        let v2 = v.component(1);
        let c1 = ScalarField::from_values_unchecked(
            v.grid(),
            itertools::izip!(self.xx.values(), self.xy.values(), v1.values(), v2.values())
                .map(|(xx, xy, a, b)| xx * a + xy * b)
                .collect(),
        );
        let c2 = ScalarField::from_values_unchecked(
            v.grid(),
            itertools::izip!(self.xy.values(), self.yy.values(), v1.values(), v2.values())
                .map(|(xy, yy, a, b)| xy * a + yy * b)
                .collect(),
        );
        VectorField::from_pair(c1, c2)
    }

    /// Smaller eigenvalue at every lattice point.
    pub fn min_eigenvalue_field(&self) -> ScalarField {
        let values = itertools::izip!(self.xx.values(), self.xy.values(), self.yy.values())
            .map(|(&a, &b, &c)| sym2_min_eigenvalue(a, b, c))
            .collect();
        ScalarField::from_values_unchecked(self.grid(), values)
    }

    /// Lattice minimum of the smaller eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue_field()
            .values()
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// Smaller eigenvalue of `[[a, b], [b, c]]`.
#[inline]
pub fn sym2_min_eigenvalue(a: f64, b: f64, c: f64) -> f64 {
    0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
}

/// Anything made of scalar components on a common grid.
pub trait Field {
    fn grid(&self) -> Grid;
    fn scalar_components(&self) -> Vec<&ScalarField>;
}

impl Field for ScalarField {
    fn grid(&self) -> Grid {
        self.grid
    }
    fn scalar_components(&self) -> Vec<&ScalarField> {
        vec![self]
    }
}

impl Field for VectorField {
    fn grid(&self) -> Grid {
        self.grid()
    }
    fn scalar_components(&self) -> Vec<&ScalarField> {
        self.components.iter().collect()
    }
}
