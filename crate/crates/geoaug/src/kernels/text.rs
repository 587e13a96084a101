//! Parenthesized text form for kernel expressions.
//!
//! Examples: `LIN{var=1}`, `SUM(LIN{var=1}, PROD(RBF{var=1, sigma=0.42},
//! QUAD{var=1, c=1}))`. Parameters may be omitted on input (they default to
//! 1); `Display` always prints them so the form round-trips exactly.

use std::fmt;
use std::str::FromStr;

use super::{KernelError, KernelExpr};
use crate::scalar::{s, Scalar};

impl<T: Scalar> fmt::Display for KernelExpr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelExpr::Lin { var, dims } => {
                write!(f, "LIN{{var={}", var.to_f64_lossy())?;
                write_dims(f, dims)?;
                write!(f, "}}")
            }
            KernelExpr::Rbf { var, sigma, dims } => {
                write!(
                    f,
                    "RBF{{var={}, sigma={}",
                    var.to_f64_lossy(),
                    sigma.to_f64_lossy()
                )?;
                write_dims(f, dims)?;
                write!(f, "}}")
            }
            KernelExpr::Quad { var, offset, dims } => {
                write!(
                    f,
                    "QUAD{{var={}, c={}",
                    var.to_f64_lossy(),
                    offset.to_f64_lossy()
                )?;
                write_dims(f, dims)?;
                write!(f, "}}")
            }
            KernelExpr::Sum(l, r) => write!(f, "SUM({l}, {r})"),
            KernelExpr::Product(l, r) => write!(f, "PROD({l}, {r})"),
        }
    }
}

fn write_dims(f: &mut fmt::Formatter<'_>, dims: &Option<Vec<usize>>) -> fmt::Result {
    if let Some(ds) = dims {
        write!(f, ", dims=[")?;
        for (i, d) in ds.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "]")?;
    }
    Ok(())
}

impl<T: Scalar> FromStr for KernelExpr<T> {
    type Err = KernelError;

    fn from_str(input: &str) -> Result<Self, KernelError> {
        let mut p = Parser {
            src: input.as_bytes(),
            pos: 0,
        };
        let expr = p.parse_expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(KernelError::Parse(format!(
                "trailing input at byte {}",
                p.pos
            )));
        }
        Ok(expr)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), KernelError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(KernelError::Parse(format!(
                "expected '{}' at byte {}",
                c as char, self.pos
            )))
        }
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn number(&mut self) -> Result<f64, KernelError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+' | b'e' | b'E'))
        {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|t| t.parse::<f64>().ok())
            .ok_or_else(|| KernelError::Parse(format!("expected number at byte {start}")))
    }

    fn parse_expr<T: Scalar>(&mut self) -> Result<KernelExpr<T>, KernelError> {
        let name = self.ident();
        match name.as_str() {
            "SUM" | "PROD" => {
                self.expect(b'(')?;
                let left = self.parse_expr()?;
                self.expect(b',')?;
                let right = self.parse_expr()?;
                self.expect(b')')?;
                Ok(if name == "SUM" {
                    KernelExpr::sum(left, right)
                } else {
                    KernelExpr::product(left, right)
                })
            }
            "LIN" | "RBF" | "QUAD" => {
                let (var, sigma, c, dims) = self.parse_leaf_params()?;
                let var = var.unwrap_or(1.0);
                Ok(match name.as_str() {
                    "LIN" => KernelExpr::Lin {
                        var: s(var),
                        dims,
                    },
                    "RBF" => KernelExpr::Rbf {
                        var: s(var),
                        sigma: s(sigma.unwrap_or(1.0)),
                        dims,
                    },
                    _ => KernelExpr::Quad {
                        var: s(var),
                        offset: s(c.unwrap_or(1.0)),
                        dims,
                    },
                })
            }
            other => Err(KernelError::Parse(format!(
                "unknown kernel '{other}' at byte {}",
                self.pos
            ))),
        }
    }

    #[allow(clippy::type_complexity)]
    fn parse_leaf_params(
        &mut self,
    ) -> Result<(Option<f64>, Option<f64>, Option<f64>, Option<Vec<usize>>), KernelError> {
        let (mut var, mut sigma, mut c, mut dims) = (None, None, None, None);
        self.skip_ws();
        if self.peek() != Some(b'{') {
            return Ok((var, sigma, c, dims));
        }
        self.pos += 1;
        loop {
            self.skip_ws();
            if self.peek() == Some(b'}') {
                self.pos += 1;
                break;
            }
            let key = self.ident();
            self.expect(b'=')?;
            match key.as_str() {
                "var" => var = Some(self.number()?),
                "sigma" => sigma = Some(self.number()?),
                "c" => c = Some(self.number()?),
                "dims" => {
                    self.expect(b'[')?;
                    let mut ds = Vec::new();
                    loop {
                        self.skip_ws();
                        if self.peek() == Some(b']') {
                            self.pos += 1;
                            break;
                        }
                        let v = self.number()?;
                        if v < 0.0 || v.fract() != 0.0 {
                            return Err(KernelError::Parse(format!(
                                "dims entries must be non-negative integers, got {v}"
                            )));
                        }
                        ds.push(v as usize);
                        self.skip_ws();
                        if self.peek() == Some(b',') {
                            self.pos += 1;
                        }
                    }
                    dims = Some(ds);
                }
                other => {
                    return Err(KernelError::Parse(format!("unknown parameter '{other}'")));
                }
            }
            self.skip_ws();
            if self.peek() == Some(b',') {
                self.pos += 1;
            }
        }
        Ok((var, sigma, c, dims))
    }
}

#[cfg(test)]
mod tests {
    use super::super::KernelExpr;
    use proptest::prelude::*;

    #[test]
    fn parses_spec_example() {
        let k: KernelExpr<f64> = "SUM(LIN, PROD(RBF{sigma=0.42}, QUAD{c=1.0}))"
            .parse()
            .unwrap();
        match &k {
            KernelExpr::Sum(l, r) => {
                assert!(matches!(**l, KernelExpr::Lin { var, .. } if var == 1.0));
                match &**r {
                    KernelExpr::Product(a, b) => {
                        assert!(
                            matches!(**a, KernelExpr::Rbf { sigma, .. } if (sigma - 0.42).abs() < 1e-15)
                        );
                        assert!(matches!(**b, KernelExpr::Quad { offset, .. } if offset == 1.0));
                    }
                    other => panic!("expected product, got {other}"),
                }
            }
            other => panic!("expected sum, got {other}"),
        }
    }

    #[test]
    fn display_roundtrips_exactly() {
        let k = KernelExpr::sum(
            KernelExpr::rbf(1.2345678901234567, 0.42),
            KernelExpr::product(
                KernelExpr::quad(0.75, 1e-3),
                KernelExpr::Lin {
                    var: 2.0,
                    dims: Some(vec![0, 1]),
                },
            ),
        );
        let text = k.to_string();
        let back: KernelExpr<f64> = text.parse().unwrap();
        assert_eq!(k, back);
        assert_eq!(text, back.to_string());
    }

    #[test]
    fn rejects_garbage() {
        assert!("WAT(LIN, LIN)".parse::<KernelExpr<f64>>().is_err());
        assert!("SUM(LIN)".parse::<KernelExpr<f64>>().is_err());
        assert!("LIN{var=}".parse::<KernelExpr<f64>>().is_err());
        assert!("LIN{var=1} extra".parse::<KernelExpr<f64>>().is_err());
    }

    proptest! {
        #[test]
        fn random_trees_roundtrip(seed in 0u64..500) {
            let k = arbitrary_tree(seed);
            let text = k.to_string();
            let back: KernelExpr<f64> = text.parse().unwrap();
            prop_assert_eq!(k, back);
        }
    }

    fn arbitrary_tree(seed: u64) -> KernelExpr<f64> {
        // cheap deterministic tree builder; variety matters more than realism
        fn build(state: &mut u64, depth: usize) -> KernelExpr<f64> {
            *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let pick = (*state >> 33) % if depth >= 3 { 3 } else { 5 };
            let p1 = ((*state >> 11) % 1000) as f64 / 500.0 + 0.01;
            let p2 = ((*state >> 21) % 1000) as f64 / 250.0 + 0.05;
            match pick {
                0 => KernelExpr::lin(p1),
                1 => KernelExpr::rbf(p1, p2),
                2 => KernelExpr::quad(p1, p2),
                3 => KernelExpr::sum(build(state, depth + 1), build(state, depth + 1)),
                _ => KernelExpr::product(build(state, depth + 1), build(state, depth + 1)),
            }
        }
        let mut state = seed.wrapping_add(17);
        build(&mut state, 1)
    }
}
