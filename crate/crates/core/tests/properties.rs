use inquiry_core::hypothesis::guard::{eval, parse, to_dnf, CmpOp, GuardExpr, GuardParams, Operand};
use inquiry_core::hypothesis::fields::Value;
use proptest::prelude::*;

const BOOLS: &[&str] = &["prefix_error", "suffix_error", "base_error", "silent_letter"];
const NUMS: &[&str] = &["phoneme_match", "affix_count", "grapheme_mismatch_count"];

fn leaf() -> impl Strategy<Value = GuardExpr> {
    let op = prop_oneof![
        Just(CmpOp::Lt),
        Just(CmpOp::Le),
        Just(CmpOp::Gt),
        Just(CmpOp::Ge),
        Just(CmpOp::Eq),
        Just(CmpOp::Ne)
    ];
    let rhs = prop_oneof![(0u8..4).prop_map(|n| Operand::Num(n as f64)), Just(Operand::Param("epsilon".into()))];
    prop_oneof![
        any::<bool>().prop_map(GuardExpr::Const),
        prop::sample::select(BOOLS).prop_map(|f| GuardExpr::Field(f.into())),
        (prop::sample::select(NUMS), op, rhs).prop_map(|(f, op, rhs)| GuardExpr::Compare { field: f.into(), op, rhs }),
        (prop::sample::select(NUMS), prop::collection::vec(0u8..4, 1..3)).prop_map(|(f, set)| GuardExpr::In {
            field: f.into(),
            set: set.into_iter().map(|n| Operand::Num(n as f64)).collect(),
        }),
    ]
}

fn expr() -> impl Strategy<Value = GuardExpr> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| GuardExpr::Not(Box::new(e))),
            prop::collection::vec(inner.clone(), 2..4).prop_map(GuardExpr::And),
            prop::collection::vec(inner, 2..4).prop_map(GuardExpr::Or),
        ]
    })
}

fn facts() -> impl Strategy<Value = (Vec<bool>, Vec<u8>)> {
    (prop::collection::vec(any::<bool>(), BOOLS.len()), prop::collection::vec(0u8..4, NUMS.len()))
}

fn lookup<'a>(bools: &'a [bool], nums: &'a [u8]) -> impl Fn(&str) -> Option<Value> + 'a {
    move |name| {
        if let Some(i) = BOOLS.iter().position(|b| *b == name) {
            return Some(Value::Bool(bools[i]));
        }
        NUMS.iter().position(|n| *n == name).map(|i| Value::Num(nums[i] as f64))
    }
}

proptest! {
    #[test]
    fn dnf_agrees_with_evaluation(e in expr(), (bools, nums) in facts(), eps in 0u8..3) {
        let params = GuardParams { epsilon: eps as f64 };
        let env = lookup(&bools, &nums);
        let direct = eval(&e, &env, &params);
        let unified = to_dnf(&e).iter().any(|clause| {
            clause.iter().all(|lit| match lit.field() {
                Some(f) => lit.accepts(&env(f).unwrap(), &params),
                None => lit.accepts(&Value::Bool(true), &params),
            })
        });
        prop_assert_eq!(direct, unified, "{}", e);
    }

    #[test]
    fn printed_guards_reparse_to_the_same_meaning(e in expr(), (bools, nums) in facts()) {
        let params = GuardParams { epsilon: 1.0 };
        let env = lookup(&bools, &nums);
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert_eq!(eval(&e, &env, &params), eval(&back, &env, &params), "{}", text);
        prop_assert_eq!(back.to_string(), parse(&back.to_string()).unwrap().to_string());
    }
}
