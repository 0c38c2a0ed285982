//! Experiment drivers: the AWGN construction comparison, the non-polarizing
//! two-erasure source, the inequality battery and speed-of-polarization
//! counts.

mod awgn;
mod battery;
mod counterexample;
mod fig2;
mod speed;

use std::path::Path;

pub use awgn::AwgnSampler;
pub use battery::{
    verify_inequalities, BatteryConfig, BatteryReport, CheckKind, CheckOutcome, Family,
};

pub use counterexample::{
    bec_pair_counterexample, bec_pair_means, contrast_middle_mass, BecPairSource, ContrastReport,
    PathHistogram,
};
pub use fig2::{compare_curves, run_fig2, ArmConfig, CurveOrder, ExperimentConfig, Fig2Point};
pub use speed::{erasure_probability, erasure_table, speed_empiric};

use crate::error::{Error, Result};
use crate::gf::FieldCtx;
use crate::kernel::{binary_kernel, gamma_kernel, rs_matrix, rs_submatrix, Matrix};

/// Resolves a kernel name: `rs`, `rs:<size>`, `binary`, `gamma:<element>`,
/// or a path to a matrix file (relative paths resolved against `base`).
pub fn resolve_kernel(field: &FieldCtx, name: &str, base: Option<&Path>) -> Result<Matrix> {
    let name = name.trim();
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a.trim())),
        None => (name, None),
    };
    let number = |a: Option<&str>| -> Result<u32> {
        a.and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::ConfigError(format!("kernel {name:?} needs a numeric argument")))
    };
    match head {
        "rs" => match arg {
            None => Ok(rs_matrix(field)),
            Some(_) => rs_submatrix(field, number(arg)? as usize),
        },
        "binary" => Ok(binary_kernel(field)),
        "gamma" => gamma_kernel(field, field.elem(number(arg)?)?),
        _ => {
            let path = match base {
                Some(b) => b.join(name),
                None => Path::new(name).to_path_buf(),
            };
            let text = std::fs::read_to_string(&path).map_err(|e| {
                Error::ConfigError(format!("cannot read kernel {}: {e}", path.display()))
            })?;
            Matrix::parse_for_field(&text, field)
        }
    }
}
