//! EDMD regression and the data-driven surrogate models.
//!
//! `fit_autonomous` solves the lifted least-squares problem for one constant
//! input; `fit_bilinear` assembles the input-affine Koopman family from the
//! m+1 basis datasets; `fit_safedmd` additionally enforces the block
//! structure that pins the (controlled) equilibrium; `fit_edmdc` is the
//! linear-in-input baseline. All models carry a coordinate transform (state
//! shift, input shift and scaling) that is applied transparently around the
//! lifting, so `predict` speaks original state/input coordinates throughout.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dictionary::{Dictionary, DictionaryDescriptor};
use crate::dynamics::SampledSystem;
use crate::error::{Error, Result};
use crate::linalg::{lstsq_left, PINV_RCOND};

/// Snapshot pairs collected under one constant input: columns of `states`
/// map to the same columns of `successors` via the ground truth.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub states: DMatrix<f64>,
    pub successors: DMatrix<f64>,
    /// The held input (original coordinates) under which `successors` were
    /// generated.
    pub input: DVector<f64>,
}

impl SnapshotSet {
    pub fn new(states: DMatrix<f64>, successors: DMatrix<f64>, input: DVector<f64>) -> Result<Self> {
        if states.shape() != successors.shape() {
            return Err(Error::Dimension {
                context: "snapshot set",
                expected: states.ncols(),
                got: successors.ncols(),
            });
        }
        if states.ncols() == 0 {
            return Err(Error::EmptyData);
        }
        Ok(Self {
            states,
            successors,
            input,
        })
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Affine state shift plus input shift/scaling applied before lifting and
/// inverted after projection. Identity for systems already posed around the
/// target equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateTransform {
    pub x_shift: DVector<f64>,
    pub u_shift: DVector<f64>,
    pub u_scale: DVector<f64>,
}

impl CoordinateTransform {
    pub fn new(x_shift: DVector<f64>, u_shift: DVector<f64>, u_scale: DVector<f64>) -> Result<Self> {
        if u_shift.len() != u_scale.len() {
            return Err(Error::Dimension {
                context: "coordinate transform",
                expected: u_shift.len(),
                got: u_scale.len(),
            });
        }
        if u_scale.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("input scales must be strictly positive".into()));
        }
        Ok(Self {
            x_shift,
            u_shift,
            u_scale,
        })
    }

    pub fn identity(state_dim: usize, input_dim: usize) -> Self {
        Self {
            x_shift: DVector::zeros(state_dim),
            u_shift: DVector::zeros(input_dim),
            u_scale: DVector::from_element(input_dim, 1.0),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.x_shift.len()
    }

    pub fn input_dim(&self) -> usize {
        self.u_shift.len()
    }

    pub fn to_model_state(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.x_shift
    }

    pub fn from_model_state(&self, x: &DVector<f64>) -> DVector<f64> {
        x + &self.x_shift
    }

    pub fn to_model_input(&self, u: &DVector<f64>) -> DVector<f64> {
        (u - &self.u_shift).component_div(&self.u_scale)
    }

    pub fn from_model_input(&self, u: &DVector<f64>) -> DVector<f64> {
        u.component_mul(&self.u_scale) + &self.u_shift
    }
}

/// Regression knobs: relative singular-value cutoff for the pseudo-inverse
/// and an optional ridge parameter (default 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub rcond: f64,
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            rcond: PINV_RCOND,
            ridge: 0.0,
        }
    }
}

/// Lift every column of an n x d state matrix (model coordinates).
fn lift_columns(dict: &Dictionary, states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut lifted = DMatrix::zeros(dict.size(), states.ncols());
    for (j, col) in states.column_iter().enumerate() {
        let z = dict.lift(&col.into_owned())?;
        lifted.set_column(j, &z);
    }
    Ok(lifted)
}

/// Minimizer of ||K Psi_X - Psi_Y||_F over square matrices K, computed as
/// `Psi_Y Psi_X^+` (the minimal-norm solution on rank-deficient data).
/// States and successors are expected in model coordinates.
pub fn fit_autonomous(
    dict: &Dictionary,
    states: &DMatrix<f64>,
    successors: &DMatrix<f64>,
    opts: &FitOptions,
) -> Result<DMatrix<f64>> {
    if states.ncols() == 0 {
        return Err(Error::EmptyData);
    }
    let psi_x = lift_columns(dict, states)?;
    let psi_y = lift_columns(dict, successors)?;
    Ok(lstsq_left(&psi_x, &psi_y, opts.rcond, opts.ridge))
}

/// Compatibility route emitting the literal normal-equation form
/// `C^{-1} A` with `C = Psi_X Psi_X^T`, `A = Psi_X Psi_Y^T`; on full-rank
/// data this is the transpose of [`fit_autonomous`]'s minimizer.
pub fn fit_autonomous_paper_literal(
    dict: &Dictionary,
    states: &DMatrix<f64>,
    successors: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if states.ncols() == 0 {
        return Err(Error::EmptyData);
    }
    let psi_x = lift_columns(dict, states)?;
    let psi_y = lift_columns(dict, successors)?;
    let c = &psi_x * psi_x.transpose();
    let a = &psi_x * psi_y.transpose();
    c.full_piv_lu()
        .solve(&a)
        .ok_or(Error::SingularJacobian)
}

/// Bilinear Koopman surrogate: one operator per basis input, interpolated
/// affinely in the (transformed) input.
#[derive(Debug, Clone)]
pub struct BilinearKoopmanModel {
    dict: Dictionary,
    transform: CoordinateTransform,
    k0: DMatrix<f64>,
    k_inputs: Vec<DMatrix<f64>>,
    safedmd: bool,
}

impl BilinearKoopmanModel {
    pub fn from_parts(
        dict: Dictionary,
        transform: CoordinateTransform,
        k0: DMatrix<f64>,
        k_inputs: Vec<DMatrix<f64>>,
        safedmd: bool,
    ) -> Result<Self> {
        let size = dict.size();
        if k0.nrows() != size || k0.ncols() != size {
            return Err(Error::Dimension {
                context: "bilinear model K0",
                expected: size,
                got: k0.nrows(),
            });
        }
        for k in &k_inputs {
            if k.nrows() != size || k.ncols() != size {
                return Err(Error::Dimension {
                    context: "bilinear model Ki",
                    expected: size,
                    got: k.nrows(),
                });
            }
        }
        if transform.state_dim() != dict.state_dim() {
            return Err(Error::Dimension {
                context: "bilinear model transform",
                expected: dict.state_dim(),
                got: transform.state_dim(),
            });
        }
        if transform.input_dim() != k_inputs.len() {
            return Err(Error::Dimension {
                context: "bilinear model inputs",
                expected: k_inputs.len(),
                got: transform.input_dim(),
            });
        }
        let model = Self {
            dict,
            transform,
            k0,
            k_inputs,
            safedmd,
        };
        if safedmd {
            model.check_safedmd_structure()?;
        }
        Ok(model)
    }

    fn check_safedmd_structure(&self) -> Result<()> {
        let size = self.dict.size();
        let first_row_ok = |k: &DMatrix<f64>| {
            k[(0, 0)] == 1.0 && (1..size).all(|j| k[(0, j)] == 0.0)
        };
        if !first_row_ok(&self.k0) || !self.k_inputs.iter().all(first_row_ok) {
            return Err(Error::Config(
                "safedmd matrices must have first row (1, 0, ..., 0)".into(),
            ));
        }
        if (1..size).any(|i| self.k0[(i, 0)] != 0.0) {
            return Err(Error::Config(
                "safedmd K0 must have a zero first column below the constant slot".into(),
            ));
        }
        Ok(())
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn transform(&self) -> &CoordinateTransform {
        &self.transform
    }

    pub fn is_safedmd(&self) -> bool {
        self.safedmd
    }

    pub fn k0(&self) -> &DMatrix<f64> {
        &self.k0
    }

    pub fn k_input(&self, i: usize) -> &DMatrix<f64> {
        &self.k_inputs[i]
    }

    pub fn input_dim(&self) -> usize {
        self.k_inputs.len()
    }

    /// Operator interpolation at an input given in the model's transformed
    /// coordinates: `K0 + sum_i u[i] (Ki - K0)` (the basis inputs are the
    /// unit vectors there, so the interpolation weights are the components).
    /// Evaluated as the affine combination `(1 - sum u) K0 + sum_i u[i] Ki`
    /// so that the basis inputs reproduce their operators bit-exactly.
    pub fn koopman_at(&self, u_transformed: &DVector<f64>) -> Result<DMatrix<f64>> {
        if u_transformed.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "koopman_at",
                expected: self.input_dim(),
                got: u_transformed.len(),
            });
        }
        let weight0 = 1.0 - u_transformed.sum();
        let mut k = &self.k0 * weight0;
        for (i, ki) in self.k_inputs.iter().enumerate() {
            if u_transformed[i] != 0.0 {
                k += ki * u_transformed[i];
            }
        }
        if self.safedmd {
            // All basis operators share the structural first row, so the
            // interpolant does too; restore it against rounding in the
            // combination weights.
            k[(0, 0)] = 1.0;
            for j in 1..k.ncols() {
                k[(0, j)] = 0.0;
            }
        }
        Ok(k)
    }
}

/// EDMD-with-control baseline: lifted dynamics linear in the input,
/// `z+ = A z + B u` (transformed coordinates).
#[derive(Debug, Clone)]
pub struct EdmdcModel {
    dict: Dictionary,
    transform: CoordinateTransform,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl EdmdcModel {
    pub fn from_parts(
        dict: Dictionary,
        transform: CoordinateTransform,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
    ) -> Result<Self> {
        let size = dict.size();
        if a.nrows() != size || a.ncols() != size {
            return Err(Error::Dimension {
                context: "edmdc A",
                expected: size,
                got: a.nrows(),
            });
        }
        if b.nrows() != size || b.ncols() != transform.input_dim() {
            return Err(Error::Dimension {
                context: "edmdc B",
                expected: size,
                got: b.nrows(),
            });
        }
        Ok(Self {
            dict,
            transform,
            a,
            b,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
}

/// Either surrogate family behind one prediction interface.
#[derive(Debug, Clone)]
pub enum SurrogateModel {
    Bilinear(BilinearKoopmanModel),
    Edmdc(EdmdcModel),
}

impl SurrogateModel {
    pub fn dictionary(&self) -> &Dictionary {
        match self {
            SurrogateModel::Bilinear(m) => &m.dict,
            SurrogateModel::Edmdc(m) => &m.dict,
        }
    }

    pub fn transform(&self) -> &CoordinateTransform {
        match self {
            SurrogateModel::Bilinear(m) => &m.transform,
            SurrogateModel::Edmdc(m) => &m.transform,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.dictionary().state_dim()
    }

    pub fn input_dim(&self) -> usize {
        match self {
            SurrogateModel::Bilinear(m) => m.input_dim(),
            SurrogateModel::Edmdc(m) => m.b.ncols(),
        }
    }

    /// Dimension of the lifted space, M + 1.
    pub fn lifted_dim(&self) -> usize {
        self.dictionary().size()
    }

    pub fn is_safedmd(&self) -> bool {
        matches!(self, SurrogateModel::Bilinear(m) if m.safedmd)
    }

    /// Lift an original-coordinates state into the model's observable space.
    pub fn lift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let xt = self.transform().to_model_state(x);
        self.dictionary().lift(&xt)
    }

    /// Project a lifted vector back to original state coordinates.
    pub fn project_lifted(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let xt = self.dictionary().project(z)?;
        Ok(self.transform().from_model_state(&xt))
    }

    /// Lifted-space operator applied for one step under an
    /// original-coordinates input; no projection or re-lift.
    pub fn predict_lifted(&self, z: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.lifted_dim() {
            return Err(Error::Dimension {
                context: "predict_lifted",
                expected: self.lifted_dim(),
                got: z.len(),
            });
        }
        let ut = self.transform().to_model_input(u);
        match self {
            SurrogateModel::Bilinear(m) => Ok(m.koopman_at(&ut)? * z),
            SurrogateModel::Edmdc(m) => Ok(&m.a * z + &m.b * ut),
        }
    }

    /// One-step surrogate prediction in original coordinates:
    /// project(K_u lift(x)) with the coordinate transform applied and
    /// inverted around the lifting.
    pub fn predict(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let z = self.lift(x)?;
        let z_next = self.predict_lifted(&z, u)?;
        self.project_lifted(&z_next)
    }

    /// Prediction plus Jacobians of the projected step with respect to the
    /// original-coordinates state and input.
    pub fn predict_with_jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let n = self.state_dim();
        let xt = self.transform().to_model_state(x);
        let ut = self.transform().to_model_input(u);
        let z = self.dictionary().lift(&xt)?;
        let lift_jac = self.dictionary().jacobian(&xt)?;
        let (z_next, jac_z_rows, du_lifted) = match self {
            SurrogateModel::Bilinear(m) => {
                let k = m.koopman_at(&ut)?;
                let z_next = &k * &z;
                let mut du = DMatrix::zeros(self.lifted_dim(), self.input_dim());
                for i in 0..self.input_dim() {
                    let col = (m.k_input(i) - &m.k0) * &z / self.transform().u_scale[i];
                    du.set_column(i, &col);
                }
                (z_next, k, du)
            }
            SurrogateModel::Edmdc(m) => {
                let z_next = &m.a * &z + &m.b * &ut;
                let mut du = m.b.clone();
                for i in 0..self.input_dim() {
                    du.column_mut(i).scale_mut(1.0 / self.transform().u_scale[i]);
                }
                (z_next, m.a.clone(), du)
            }
        };
        // Rows 1..=n of the lifted step are the projected step; the affine
        // untransform contributes no derivative.
        let jac_x = (jac_z_rows * lift_jac).rows(1, n).into_owned();
        let jac_u = du_lifted.rows(1, n).into_owned();
        let x_next = self.project_lifted(&z_next)?;
        Ok((x_next, jac_x, jac_u))
    }

    /// Lifted step plus Jacobians with respect to the lifted state and the
    /// original-coordinates input.
    pub fn predict_lifted_with_jacobians(
        &self,
        z: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let ut = self.transform().to_model_input(u);
        match self {
            SurrogateModel::Bilinear(m) => {
                let k = m.koopman_at(&ut)?;
                let z_next = &k * z;
                let mut du = DMatrix::zeros(self.lifted_dim(), self.input_dim());
                for i in 0..self.input_dim() {
                    let col = (m.k_input(i) - &m.k0) * z / self.transform().u_scale[i];
                    du.set_column(i, &col);
                }
                Ok((z_next, k, du))
            }
            SurrogateModel::Edmdc(m) => {
                let z_next = &m.a * z + &m.b * &ut;
                let mut du = m.b.clone();
                for i in 0..self.input_dim() {
                    du.column_mut(i).scale_mut(1.0 / self.transform().u_scale[i]);
                }
                Ok((z_next, m.a.clone(), du))
            }
        }
    }
}

/// Check that a snapshot set was collected under the expected transformed
/// basis input (0 for index 0, the unit vectors otherwise).
fn check_basis_input(
    transform: &CoordinateTransform,
    set: &SnapshotSet,
    index: usize,
) -> Result<()> {
    let ut = transform.to_model_input(&set.input);
    let mut expected = DVector::zeros(transform.input_dim());
    if index > 0 {
        expected[index - 1] = 1.0;
    }
    if (ut - expected).norm() > 1e-9 {
        return Err(Error::BadBasisInput { index });
    }
    Ok(())
}

fn transform_states(transform: &CoordinateTransform, states: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = states.clone();
    for mut col in out.column_iter_mut() {
        col -= &transform.x_shift;
    }
    out
}

/// Fit the m+1 Koopman operators independently, one per basis dataset
/// (dataset 0 under u = 0, dataset i under u = e_i, both in transformed
/// input coordinates).
pub fn fit_bilinear(
    dict: &Dictionary,
    transform: &CoordinateTransform,
    datasets: &[SnapshotSet],
    opts: &FitOptions,
) -> Result<BilinearKoopmanModel> {
    let m = transform.input_dim();
    if datasets.len() != m + 1 {
        return Err(Error::DatasetCount {
            expected: m + 1,
            got: datasets.len(),
        });
    }
    let mut matrices = Vec::with_capacity(m + 1);
    for (i, set) in datasets.iter().enumerate() {
        check_basis_input(transform, set, i)?;
        let x = transform_states(transform, &set.states);
        let y = transform_states(transform, &set.successors);
        matrices.push(fit_autonomous(dict, &x, &y, opts)?);
    }
    let k0 = matrices.remove(0);
    BilinearKoopmanModel::from_parts(dict.clone(), transform.clone(), k0, matrices, false)
}

/// SafEDMD fit: same data layout as [`fit_bilinear`], but every matrix is
/// assembled with the equilibrium-preserving block structure — first row
/// (1, 0, ..., 0) everywhere, and a zero first column below the constant
/// slot in K0.
pub fn fit_safedmd(
    dict: &Dictionary,
    transform: &CoordinateTransform,
    datasets: &[SnapshotSet],
    opts: &FitOptions,
) -> Result<BilinearKoopmanModel> {
    let m = transform.input_dim();
    if datasets.len() != m + 1 {
        return Err(Error::DatasetCount {
            expected: m + 1,
            got: datasets.len(),
        });
    }
    let size = dict.size();
    let reduced = size - 1;
    let mut k0 = DMatrix::zeros(size, size);
    k0[(0, 0)] = 1.0;
    let mut k_inputs = Vec::with_capacity(m);

    for (i, set) in datasets.iter().enumerate() {
        check_basis_input(transform, set, i)?;
        let x = transform_states(transform, &set.states);
        let y = transform_states(transform, &set.successors);
        let psi_x = lift_columns(dict, &x)?;
        let psi_y = lift_columns(dict, &y)?;
        let zy = psi_y.rows(1, reduced).into_owned();
        if i == 0 {
            // A regresses non-constant successors on non-constant states.
            let zx = psi_x.rows(1, reduced).into_owned();
            let a = lstsq_left(&zx, &zy, opts.rcond, opts.ridge);
            k0.view_mut((1, 1), (reduced, reduced)).copy_from(&a);
        } else {
            // (b_i, B_i) regress non-constant successors on the full lifted
            // state; the constant column becomes b_i.
            let g = lstsq_left(&psi_x, &zy, opts.rcond, opts.ridge);
            let mut ki = DMatrix::zeros(size, size);
            ki[(0, 0)] = 1.0;
            ki.view_mut((1, 0), (reduced, size)).copy_from(&g);
            k_inputs.push(ki);
        }
    }
    BilinearKoopmanModel::from_parts(dict.clone(), transform.clone(), k0, k_inputs, true)
}

/// Pool basis snapshot sets into flat (states, inputs, successors) data for
/// the EDMDc baseline, reusing the same data budget.
pub fn pool_snapshots(datasets: &[SnapshotSet]) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if datasets.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = datasets[0].states.nrows();
    let m = datasets[0].input.len();
    let total: usize = datasets.iter().map(|s| s.len()).sum();
    let mut states = DMatrix::zeros(n, total);
    let mut inputs = DMatrix::zeros(m, total);
    let mut successors = DMatrix::zeros(n, total);
    let mut at = 0;
    for set in datasets {
        let d = set.len();
        states.view_mut((0, at), (n, d)).copy_from(&set.states);
        successors
            .view_mut((0, at), (n, d))
            .copy_from(&set.successors);
        for j in 0..d {
            inputs.set_column(at + j, &set.input);
        }
        at += d;
    }
    Ok((states, inputs, successors))
}

/// EDMDc fit from (x, u, y) triples: minimizes ||[A B][Psi_X; U] - Psi_Y||_F
/// through the stacked pseudo-inverse.
pub fn fit_edmdc(
    dict: &Dictionary,
    transform: &CoordinateTransform,
    states: &DMatrix<f64>,
    inputs: &DMatrix<f64>,
    successors: &DMatrix<f64>,
    opts: &FitOptions,
) -> Result<EdmdcModel> {
    let d = states.ncols();
    if d == 0 {
        return Err(Error::EmptyData);
    }
    if inputs.ncols() != d || successors.ncols() != d {
        return Err(Error::Dimension {
            context: "edmdc triples",
            expected: d,
            got: inputs.ncols().min(successors.ncols()),
        });
    }
    let m = transform.input_dim();
    let size = dict.size();
    let psi_x = lift_columns(dict, &transform_states(transform, states))?;
    let psi_y = lift_columns(dict, &transform_states(transform, successors))?;
    let mut stacked = DMatrix::zeros(size + m, d);
    stacked.view_mut((0, 0), (size, d)).copy_from(&psi_x);
    for j in 0..d {
        let ut = transform.to_model_input(&inputs.column(j).into_owned());
        stacked.view_mut((size, j), (m, 1)).copy_from(&ut);
    }
    let w = lstsq_left(&stacked, &psi_y, opts.rcond, opts.ridge);
    let a = w.columns(0, size).into_owned();
    let b = w.columns(size, m).into_owned();
    EdmdcModel::from_parts(dict.clone(), transform.clone(), a, b)
}

/// One-step modeling error `w = F(x, u) - F_hat(x, u)` between the sampled
/// ground truth and a surrogate.
pub fn modeling_error(
    truth: &SampledSystem,
    model: &SurrogateModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    Ok(truth.step(x, u)? - model.predict(x, u)?)
}

// ---------------------------------------------------------------------------
// Model file (JSON, row-major matrices)
// ---------------------------------------------------------------------------

pub const MODEL_FORMAT: &str = "koopman-mpc/model-v1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDto {
    rows: usize,
    cols: usize,
    /// Row-major entries.
    data: Vec<f64>,
}

impl MatrixDto {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::ModelFile(format!(
                "matrix payload holds {} entries for a {}x{} shape",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformDto {
    x_shift: Vec<f64>,
    u_shift: Vec<f64>,
    u_scale: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    kind: String,
    dictionary: DictionaryDescriptor,
    transform: TransformDto,
    #[serde(skip_serializing_if = "Option::is_none")]
    k0: Option<MatrixDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_inputs: Option<Vec<MatrixDto>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<MatrixDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<MatrixDto>,
}

impl SurrogateModel {
    pub fn to_json(&self) -> Result<String> {
        let transform = self.transform();
        let dto = TransformDto {
            x_shift: transform.x_shift.iter().copied().collect(),
            u_shift: transform.u_shift.iter().copied().collect(),
            u_scale: transform.u_scale.iter().copied().collect(),
        };
        let file = match self {
            SurrogateModel::Bilinear(m) => ModelFile {
                format: MODEL_FORMAT.to_string(),
                kind: if m.safedmd { "safedmd" } else { "bilinear" }.to_string(),
                dictionary: m.dict.descriptor(),
                transform: dto,
                k0: Some(MatrixDto::from_matrix(&m.k0)),
                k_inputs: Some(m.k_inputs.iter().map(MatrixDto::from_matrix).collect()),
                a: None,
                b: None,
            },
            SurrogateModel::Edmdc(m) => ModelFile {
                format: MODEL_FORMAT.to_string(),
                kind: "edmdc".to_string(),
                dictionary: m.dict.descriptor(),
                transform: dto,
                k0: None,
                k_inputs: None,
                a: Some(MatrixDto::from_matrix(&m.a)),
                b: Some(MatrixDto::from_matrix(&m.b)),
            },
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::ModelFile(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFile(format!(
                "unsupported model format {:?}",
                file.format
            )));
        }
        let dict = Dictionary::from_descriptor(&file.dictionary)?;
        let transform = CoordinateTransform::new(
            DVector::from_vec(file.transform.x_shift),
            DVector::from_vec(file.transform.u_shift),
            DVector::from_vec(file.transform.u_scale),
        )?;
        match file.kind.as_str() {
            "bilinear" | "safedmd" => {
                let k0 = file
                    .k0
                    .ok_or_else(|| Error::ModelFile("bilinear model without K0".into()))?
                    .to_matrix()?;
                let k_inputs = file
                    .k_inputs
                    .ok_or_else(|| Error::ModelFile("bilinear model without Ki".into()))?
                    .iter()
                    .map(MatrixDto::to_matrix)
                    .collect::<Result<Vec<_>>>()?;
                Ok(SurrogateModel::Bilinear(BilinearKoopmanModel::from_parts(
                    dict,
                    transform,
                    k0,
                    k_inputs,
                    file.kind == "safedmd",
                )?))
            }
            "edmdc" => {
                let a = file
                    .a
                    .ok_or_else(|| Error::ModelFile("edmdc model without A".into()))?
                    .to_matrix()?;
                let b = file
                    .b
                    .ok_or_else(|| Error::ModelFile("edmdc model without B".into()))?
                    .to_matrix()?;
                Ok(SurrogateModel::Edmdc(EdmdcModel::from_parts(
                    dict, transform, a, b,
                )?))
            }
            other => Err(Error::ModelFile(format!("unknown model kind {other:?}"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}
