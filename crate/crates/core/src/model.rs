//! Plant models: the two-stage switched power amplifier, zero-order-hold
//! discretisation and the finite input alphabet `{0,1}^m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ensure_finite, ensure_square, mat_exp, spectral_radius, Matrix, Vector, MAT_EXP_TOL};

/// Circuit constants of the two-stage amplifier (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplifierParams {
    #[serde(rename = "V_bus")]
    pub v_bus: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "L_m")]
    pub l_m: f64,
    #[serde(rename = "R_m")]
    pub r_m: f64,
}

impl AmplifierParams {
    /// The industrial amplifier: 360 V bus, 44 µH / 0.4 µF power stages with
    /// 62.2 µΩ parasitic resistance, 20 mH / 10 Ω load.
    pub fn industrial() -> Self {
        Self {
            v_bus: 360.0,
            l: 44e-6,
            c: 0.4e-6,
            r: 62.2e-6,
            l_m: 20e-3,
            r_m: 10.0,
        }
    }

    /// The parasitic resistance `R` may be zero; every other constant must be
    /// strictly positive.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let fields = [
            ("V_bus", self.v_bus, false),
            ("L", self.l, false),
            ("C", self.c, false),
            ("R", self.r, true),
            ("L_m", self.l_m, false),
            ("R_m", self.r_m, false),
        ];
        for (name, value, zero_ok) in fields {
            let ok = value.is_finite() && (value > 0.0 || (zero_ok && value == 0.0));
            if !ok {
                let need = if zero_ok { "non-negative" } else { "strictly positive" };
                return Err(Error::validation(
                    format!("{prefix}{name}"),
                    format!("must be finite and {need}, got {value}"),
                ));
            }
        }
        Ok(())
    }
}

/// `ẋ = A_c x + B_c u`, `y = C_c x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSystem {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

impl ContinuousSystem {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        check_dims(&a, &b, &c)?;
        Ok(Self { a, b, c })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
}

/// `x(k+1) = A x(k) + B u(k)`, `y(k) = C x(k)` with `u(k) ∈ {0,1}^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub sample_period: f64,
}

impl DiscreteSystem {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, sample_period: f64) -> Result<Self> {
        check_dims(&a, &b, &c)?;
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::validation(
                "sample_period",
                format!("must be positive, got {sample_period}"),
            ));
        }
        if b.ncols() > 16 {
            return Err(Error::validation("B", "at most 16 binary inputs are supported"));
        }
        Ok(Self {
            a,
            b,
            c,
            sample_period,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_bits(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Cardinality `2^m` of the finite control set.
    pub fn alphabet_size(&self) -> usize {
        1 << self.input_bits()
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius(&self.a)
    }

    /// `A x + B u`.
    pub fn step(&self, x: &Vector, u: &InputVector) -> Result<Vector> {
        self.check_state(x)?;
        self.check_input(u)?;
        Ok(&self.a * x + &self.b * u.to_vector())
    }

    /// `C x`.
    pub fn output(&self, x: &Vector) -> Result<Vector> {
        self.check_state(x)?;
        Ok(&self.c * x)
    }

    /// `B u` for every input code, indexed by code.
    pub fn input_responses(&self) -> Vec<Vector> {
        let m = self.input_bits();
        (0..self.alphabet_size())
            .map(|code| &self.b * InputVector::from_code(code, m).to_vector())
            .collect()
    }

    pub(crate) fn check_state(&self, x: &Vector) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(Error::dimension("state vector", self.state_dim(), x.len()));
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, u: &InputVector) -> Result<()> {
        if u.len() != self.input_bits() {
            return Err(Error::dimension("input vector", self.input_bits(), u.len()));
        }
        Ok(())
    }
}

fn check_dims(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<()> {
    ensure_square("A", a)?;
    ensure_finite("A", a)?;
    ensure_finite("B", b)?;
    ensure_finite("C", c)?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::dimension("B rows", n, b.nrows()));
    }
    if c.ncols() != n {
        return Err(Error::dimension("C columns", n, c.ncols()));
    }
    Ok(())
}

/// One element of `{0,1}^m`.
///
/// Inputs are also addressed by an integer code: the bits read as a binary
/// number with the first entry most significant, so the last vector entry is
/// bit 0. For the amplifier `(S_p, S_n)` the code is `2·S_p + S_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct InputVector {
    bits: Vec<u8>,
}

impl InputVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::validation("input", format!("entries must be 0 or 1, got {b}")));
        }
        Ok(Self { bits })
    }

    pub fn zeros(m: usize) -> Self {
        Self { bits: vec![0; m] }
    }

    pub fn from_code(code: usize, m: usize) -> Self {
        let bits = (0..m).map(|j| ((code >> (m - 1 - j)) & 1) as u8).collect();
        Self { bits }
    }

    pub fn code(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_vector(&self) -> Vector {
        Vector::from_iterator(self.bits.len(), self.bits.iter().map(|&b| b as f64))
    }
}

impl TryFrom<Vec<u8>> for InputVector {
    type Error = Error;

    fn try_from(bits: Vec<u8>) -> Result<Self> {
        Self::new(bits)
    }
}

impl From<InputVector> for Vec<u8> {
    fn from(u: InputVector) -> Self {
        u.bits
    }
}

/// Operation mode (1..=4) of a two-switch input `(S_p, S_n)`.
///
/// The pairing `(0,0)→1, (0,1)→2, (1,0)→3, (1,1)→4` is inferred, not
/// tabulated: mode 3 closes S1 (so `S_p = 1`) and opens S3 (`S_n = 0`), and the
/// reference input cycle `(1,0),(0,1),(1,0),(0,0),(0,0),(0,0)` reads as modes
/// `3,2,3,1,1,1`. With this pairing the mode is simply `code + 1`.
pub fn mode_of_input(u: &InputVector) -> Result<u8> {
    if u.len() != 2 {
        return Err(Error::validation(
            "input",
            format!("operation modes are defined for m = 2 only, got m = {}", u.len()),
        ));
    }
    Ok(u.code() as u8 + 1)
}

pub fn input_of_mode(mode: u8) -> Result<InputVector> {
    if !(1..=4).contains(&mode) {
        return Err(Error::validation("mode", format!("must be in 1..=4, got {mode}")));
    }
    Ok(InputVector::from_code(mode as usize - 1, 2))
}

/// Continuous model of the amplifier with state
/// `(i_Lp, v_Cp, i_Ln, v_Cn, i_o)`, inputs `(S_p, S_n)` and output `i_o`.
pub fn build_amplifier(p: &AmplifierParams) -> Result<ContinuousSystem> {
    p.validate("")?;
    let AmplifierParams {
        v_bus,
        l,
        c,
        r,
        l_m,
        r_m,
    } = *p;
    #[rustfmt::skip]
    let a = Matrix::from_row_slice(5, 5, &[
        -r / l,   -1.0 / l,   0.0,      0.0,        r / l,
        1.0 / c,  0.0,        0.0,      0.0,        -1.0 / c,
        0.0,      0.0,        -r / l,   -1.0 / l,   -r / l,
        0.0,      0.0,        1.0 / c,  0.0,        1.0 / c,
        r / l_m,  1.0 / l_m,  -r / l_m, -1.0 / l_m, -(2.0 * r + r_m) / l_m,
    ]);
    #[rustfmt::skip]
    let b = Matrix::from_row_slice(5, 2, &[
        v_bus / l, 0.0,
        0.0,       0.0,
        0.0,       v_bus / l,
        0.0,       0.0,
        0.0,       0.0,
    ]);
    let c_out = Matrix::from_row_slice(1, 5, &[0.0, 0.0, 0.0, 0.0, 1.0]);
    ContinuousSystem::new(a, b, c_out)
}

/// Zero-order-hold discretisation at sampling frequency `f_s`.
///
/// Both `A = e^{A_c T}` and `B = ∫₀ᵀ e^{A_c τ} dτ · B_c` are read off one
/// exponential of the augmented block `[[A_c, B_c], [0, 0]]·T`.
pub fn zoh_discretize(sys: &ContinuousSystem, f_s: f64) -> Result<DiscreteSystem> {
    if !(f_s > 0.0 && f_s.is_finite()) {
        return Err(Error::validation("sampling.f_s", format!("must be positive, got {f_s}")));
    }
    let t = 1.0 / f_s;
    let n = sys.state_dim();
    let m = sys.b.ncols();
    let mut aug = Matrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&sys.a * t));
    aug.view_mut((0, n), (n, m)).copy_from(&(&sys.b * t));
    let e = mat_exp(&aug, MAT_EXP_TOL)?;
    let a = e.view((0, 0), (n, n)).into_owned();
    let b = e.view((0, n), (n, m)).into_owned();
    DiscreteSystem::new(a, b, sys.c.clone(), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn amplifier_entries() {
        let sys = build_amplifier(&AmplifierParams::industrial()).unwrap();
        assert_relative_eq!(sys.a[(0, 1)], -1.0 / 44e-6, max_relative = 1e-15);
        assert_relative_eq!(sys.a[(0, 1)], -22727.27, max_relative = 1e-6);
        assert_relative_eq!(sys.b[(0, 0)], 8.1818e6, max_relative = 1e-5);
        assert_eq!(sys.c, Matrix::from_row_slice(1, 5, &[0.0, 0.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn amplifier_without_parasitic_resistance() {
        let p = AmplifierParams {
            r: 0.0,
            ..AmplifierParams::industrial()
        };
        let sys = build_amplifier(&p).unwrap();
        for (i, j) in [(0, 0), (0, 4), (2, 2), (2, 4), (4, 0), (4, 2)] {
            assert_eq!(sys.a[(i, j)], 0.0);
        }
        assert_relative_eq!(sys.a[(4, 4)], -10.0 / 20e-3);
    }

    #[test]
    fn invalid_params_name_the_field() {
        let p = AmplifierParams {
            l_m: -1.0,
            ..AmplifierParams::industrial()
        };
        match build_amplifier(&p).unwrap_err() {
            Error::Validation { field, .. } => assert_eq!(field, "L_m"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zoh_of_integrator() {
        let sys = ContinuousSystem::new(Matrix::zeros(2, 2), Matrix::identity(2, 2), Matrix::identity(2, 2))
            .unwrap();
        let d = zoh_discretize(&sys, 2.0).unwrap();
        assert_relative_eq!(d.a, Matrix::identity(2, 2), epsilon = 1e-15);
        assert_relative_eq!(d.b, Matrix::identity(2, 2) * 0.5, epsilon = 1e-15);
        assert_eq!(d.sample_period, 0.5);
    }

    #[test]
    fn zoh_of_first_order_lag() {
        let one = |v: f64| Matrix::from_element(1, 1, v);
        let sys = ContinuousSystem::new(one(-1.0), one(1.0), one(1.0)).unwrap();
        let d = zoh_discretize(&sys, 1.0).unwrap();
        let e = (-1.0_f64).exp();
        assert_relative_eq!(d.a[(0, 0)], e, max_relative = 1e-14);
        assert_relative_eq!(d.b[(0, 0)], 1.0 - e, max_relative = 1e-14);
        assert!(zoh_discretize(&sys, 0.0).is_err());
    }

    #[test]
    fn step_and_output_basics() {
        let amp = zoh_discretize(&build_amplifier(&AmplifierParams::industrial()).unwrap(), 400e3).unwrap();
        let zero = Vector::zeros(5);
        assert_eq!(amp.step(&zero, &InputVector::zeros(2)).unwrap(), zero);
        let x = Vector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 7.0]);
        assert_eq!(amp.output(&x).unwrap()[0], 7.0);
        assert_eq!(amp.output(&zero).unwrap()[0], 0.0);
        assert!(amp.step(&Vector::zeros(4), &InputVector::zeros(2)).is_err());
        assert!(amp.step(&zero, &InputVector::zeros(3)).is_err());
    }

    #[test]
    fn mode_mapping() {
        let u = |a, b| InputVector::new(vec![a, b]).unwrap();
        assert_eq!(mode_of_input(&u(1, 0)).unwrap(), 3);
        assert_eq!(mode_of_input(&u(0, 0)).unwrap(), 1);
        assert_eq!(mode_of_input(&u(0, 1)).unwrap(), 2);
        assert_eq!(mode_of_input(&u(1, 1)).unwrap(), 4);
        for mode in 1..=4 {
            assert_eq!(mode_of_input(&input_of_mode(mode).unwrap()).unwrap(), mode);
        }
        assert!(mode_of_input(&InputVector::zeros(3)).is_err());
        assert!(input_of_mode(0).is_err());
        assert!(InputVector::new(vec![0, 2]).is_err());
    }

    #[test]
    fn codes_round_trip() {
        for m in 0..5 {
            for code in 0..(1usize << m) {
                assert_eq!(InputVector::from_code(code, m).code(), code);
            }
        }
        assert_eq!(InputVector::from_code(2, 2).bits(), &[1, 0]);
    }
}
