//! Random generation of well-typed expressions.
//!
//! All randomness flows through an explicit RNG so generation is
//! reproducible from a seed.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureSchema;

use super::{BoolOp, CmpOp, Expr, ExprType, NumOp};

/// Constants eligible as leaves; mutation may also perturb these by +-1.
pub const CONST_POOL: [f64; 6] = [0.0, 1.0, 2.0, 3.0, 5.0, 0.5];

const CMP_OPS: [CmpOp; 5] = [CmpOp::Gt, CmpOp::Ge, CmpOp::Lt, CmpOp::Le, CmpOp::Eq];
const NUM_OPS: [NumOp; 6] = [
    NumOp::Add,
    NumOp::Sub,
    NumOp::Mul,
    NumOp::Div,
    NumOp::Max,
    NumOp::Min,
];

/// Generate a boolean-rooted expression of depth at most `max_depth`.
/// Deterministic given the seed.
pub fn random_expr(schema: &FeatureSchema, max_depth: usize, rng_seed: u64) -> Result<Expr> {
    if schema.is_empty() {
        return Err(Error::EmptySchema);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(gen_boolean(&mut rng, schema, max_depth.max(1)))
}

fn gen_leaf<R: Rng>(rng: &mut R, schema: &FeatureSchema) -> Expr {
    if rng.gen_bool(0.75) {
        let idx = rng.gen_range(0..schema.len());
        Expr::Feature(schema.defs()[idx].name.clone())
    } else {
        Expr::Const(*CONST_POOL.choose(rng).expect("non-empty pool"))
    }
}

/// Random numeric expression of depth at most `budget`.
pub fn gen_numeric<R: Rng>(rng: &mut R, schema: &FeatureSchema, budget: usize) -> Expr {
    if budget == 0 || rng.gen_bool(0.45) {
        return gen_leaf(rng, schema);
    }
    let op = *NUM_OPS.choose(rng).expect("non-empty ops");
    Expr::NumBinary(
        op,
        Box::new(gen_numeric(rng, schema, budget - 1)),
        Box::new(gen_numeric(rng, schema, budget - 1)),
    )
}

/// Random boolean expression of depth at most `budget` (minimum 1: a
/// comparison over two leaves).
pub fn gen_boolean<R: Rng>(rng: &mut R, schema: &FeatureSchema, budget: usize) -> Expr {
    let budget = budget.max(1);
    let cmp = |rng: &mut R, depth: usize| {
        let op = *CMP_OPS.choose(rng).expect("non-empty ops");
        Expr::Compare(
            op,
            Box::new(gen_numeric(rng, schema, depth)),
            Box::new(gen_numeric(rng, schema, depth)),
        )
    };
    if budget == 1 {
        return cmp(rng, 0);
    }
    let roll: f64 = rng.gen();
    if roll < 0.5 {
        cmp(rng, budget - 1)
    } else if roll < 0.7 {
        Expr::BoolBinary(
            BoolOp::And,
            Box::new(gen_boolean(rng, schema, budget - 1)),
            Box::new(gen_boolean(rng, schema, budget - 1)),
        )
    } else if roll < 0.9 {
        Expr::BoolBinary(
            BoolOp::Or,
            Box::new(gen_boolean(rng, schema, budget - 1)),
            Box::new(gen_boolean(rng, schema, budget - 1)),
        )
    } else {
        Expr::Not(Box::new(gen_boolean(rng, schema, budget - 1)))
    }
}

/// Random subtree of the requested type with depth at most `max_depth`,
/// for point mutation.
pub fn gen_typed_subtree<R: Rng>(
    rng: &mut R,
    schema: &FeatureSchema,
    ty: ExprType,
    max_depth: usize,
) -> Expr {
    match ty {
        ExprType::Numeric => {
            let budget = rng.gen_range(0..=max_depth);
            gen_numeric(rng, schema, budget)
        }
        ExprType::Boolean => {
            let budget = rng.gen_range(1..=max_depth.max(1));
            gen_boolean(rng, schema, budget)
        }
    }
}

/// Enforce the depth bound: subtrees that would exceed it are replaced by a
/// random leaf (numeric) or a minimal comparison (boolean).
pub fn clip_depth<R: Rng>(
    expr: &Expr,
    budget: usize,
    rng: &mut R,
    schema: &FeatureSchema,
) -> Expr {
    if expr.depth() <= budget {
        return expr.clone();
    }
    match expr.ty() {
        ExprType::Numeric => {
            if budget == 0 {
                return gen_leaf(rng, schema);
            }
        }
        ExprType::Boolean => {
            if budget <= 1 {
                let op = *CMP_OPS.choose(rng).expect("non-empty ops");
                return Expr::Compare(
                    op,
                    Box::new(gen_leaf(rng, schema)),
                    Box::new(gen_leaf(rng, schema)),
                );
            }
        }
    }
    match expr {
        Expr::Feature(_) | Expr::Const(_) => expr.clone(),
        Expr::NumBinary(op, l, r) => Expr::NumBinary(
            *op,
            Box::new(clip_depth(l, budget - 1, rng, schema)),
            Box::new(clip_depth(r, budget - 1, rng, schema)),
        ),
        Expr::Compare(op, l, r) => Expr::Compare(
            *op,
            Box::new(clip_depth(l, budget - 1, rng, schema)),
            Box::new(clip_depth(r, budget - 1, rng, schema)),
        ),
        Expr::BoolBinary(op, l, r) => Expr::BoolBinary(
            *op,
            Box::new(clip_depth(l, budget - 1, rng, schema)),
            Box::new(clip_depth(r, budget - 1, rng, schema)),
        ),
        Expr::Not(c) => Expr::Not(Box::new(clip_depth(c, budget - 1, rng, schema))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detections::{Dataset, Detection, DetectionRecord};
    use crate::features::build_schema;

    fn schema2() -> FeatureSchema {
        let records = vec![DetectionRecord {
            image_id: "a".into(),
            label: 1,
            detections: ["person", "helmet"]
                .iter()
                .map(|c| Detection {
                    category: c.to_string(),
                    bbox: [0.0, 0.0, 10.0, 10.0],
                    score: 0.5,
                })
                .collect(),
        }];
        build_schema(&Dataset::from_records(records, "t"), 0.1)
    }

    #[test]
    fn clip_depth_enforces_bound_and_preserves_type() {
        let schema = schema2();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let deep = gen_boolean(&mut rng, &schema, 8);
            for bound in 1..=4usize {
                let clipped = clip_depth(&deep, bound, &mut rng, &schema);
                assert!(
                    clipped.depth() <= bound,
                    "depth {} > bound {bound}",
                    clipped.depth()
                );
                clipped.check_classifier(&schema).unwrap();
            }
        }
    }

    #[test]
    fn clip_depth_is_identity_within_bound() {
        let schema = schema2();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let e = gen_boolean(&mut rng, &schema, 3);
            let clipped = clip_depth(&e, 6, &mut rng, &schema);
            assert_eq!(clipped, e);
        }
    }
}
