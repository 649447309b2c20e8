use super::{Bound, LinearProgram, Relation, Sense};

/// Builds the linear-programming dual of `lp`.
///
/// Dual variables are named `dual[<row>]` and dual constraints `col[<var>]`.
/// A dual variable that must be nonpositive is stored negated (its column is
/// flipped) so every variable is either nonnegative or free.
pub fn build_dual(lp: &LinearProgram) -> LinearProgram {
    let (sense, pos_rel, neg_rel, row_rel) = match lp.sense {
        // max primal: <= rows give y >= 0, >= rows give y <= 0, dual rows >= c
        Sense::Maximize => (Sense::Minimize, Relation::Le, Relation::Ge, Relation::Ge),
        Sense::Minimize => (Sense::Maximize, Relation::Ge, Relation::Le, Relation::Le),
    };
    let mut dual = LinearProgram::new(sense);
    let mut flip = Vec::with_capacity(lp.n_rows());
    for c in &lp.constraints {
        let (bound, sign) = if c.relation == Relation::Eq {
            (Bound::Free, 1.0)
        } else if c.relation == pos_rel {
            (Bound::NonNegative, 1.0)
        } else {
            debug_assert_eq!(c.relation, neg_rel);
            (Bound::NonNegative, -1.0)
        };
        flip.push(sign);
        dual.add_variable(format!("dual[{}]", c.name), bound, sign * c.rhs);
    }
    for (j, v) in lp.variables.iter().enumerate() {
        let terms: Vec<(usize, f64)> = lp
            .constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| c.coeffs[j] != 0.0)
            .map(|(i, c)| (i, flip[i] * c.coeffs[j]))
            .collect();
        let rel = match v.bound {
            Bound::NonNegative => row_rel,
            Bound::Free => Relation::Eq,
        };
        dual.add_constraint(format!("col[{}]", v.name), &terms, rel, lp.objective[j]);
    }
    dual
}
