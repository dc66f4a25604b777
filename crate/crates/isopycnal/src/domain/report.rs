use std::fmt;

/// Operators of the high-order energy: `Lambda^{s-l} d_r^l` for `1 <= l <= s`
/// and `|D|^2 Lambda^{s-2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorLabel {
    LamDr(u32),
    DsqLam,
}

impl OperatorLabel {
    /// The full operator set for regularity `s`.
    pub fn set(s: u32) -> Vec<OperatorLabel> {
        let mut v: Vec<_> = (1..=s).map(OperatorLabel::LamDr).collect();
        v.push(OperatorLabel::DsqLam);
        v
    }
}

impl fmt::Display for OperatorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorLabel::LamDr(l) => write!(f, "Lambda^(s-{l}) dr^{l}"),
            OperatorLabel::DsqLam => write!(f, "|D|^2 Lambda^(s-2)"),
        }
    }
}

/// Health of a state as seen by the blow-up monitor.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Healthy,
    JacobianNearDegenerate(f64),
    BlownUp(String),
}

impl Status {
    pub fn is_blown_up(&self) -> bool {
        matches!(self, Status::BlownUp(_))
    }

    /// Short tag used in the energy CSV.
    pub fn tag(&self) -> &'static str {
        match self {
            Status::Healthy => "healthy",
            Status::JacobianNearDegenerate(_) => "near-degenerate",
            Status::BlownUp(_) => "blown-up",
        }
    }
}

/// Energy and health diagnostics of one state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub e0: f64,
    pub e: f64,
    /// Per operator: (V part, w part, eta part) of the high-order energy.
    pub contributions: Vec<(OperatorLabel, [f64; 3])>,
    pub div_residual: f64,
    pub min_jacobian: f64,
    pub mh_margin: f64,
    pub blown_up: bool,
    pub status: Status,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_set_size() {
        let s = OperatorLabel::set(3);
        assert_eq!(s.len(), 4);
        assert_eq!(s[0], OperatorLabel::LamDr(1));
        assert_eq!(s[3], OperatorLabel::DsqLam);
    }
}
