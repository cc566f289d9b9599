use std::fmt;

use super::BoolExpr;

fn precedence(e: &BoolExpr) -> u8 {
    match e {
        BoolExpr::Or(..) => 1,
        BoolExpr::And(..) => 2,
        BoolExpr::Not(_) => 3,
        BoolExpr::Var(_) => 4,
    }
}

fn child(f: &mut fmt::Formatter<'_>, e: &BoolExpr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Canonical rendering with the minimal parentheses that reparse to the
/// same tree.
impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = precedence(self);
        match self {
            BoolExpr::Var(i) => write!(f, "Symbol_{i}"),
            BoolExpr::Not(e) => {
                f.write_str("~")?;
                child(f, e, precedence(e) < p)
            }
            BoolExpr::And(l, r) | BoolExpr::Or(l, r) => {
                let op = if p == 1 { " | " } else { " & " };
                child(f, l, precedence(l) < p)?;
                f.write_str(op)?;
                child(f, r, precedence(r) <= p)
            }
        }
    }
}
