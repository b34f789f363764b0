use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use slargue::analysis::{sweep, SweepMode, SweepSpec};
use slargue::document::{parse_document, serialize_document};
use slargue::engine::assess;
use slargue::exec::Execution;
use slargue::graph::{ArgEdge, ArgNode, ArgumentGraph, NodeKind, PatternKind};
use slargue::opinion::{comultiply, deduce, fuse, multiply, ConditionalPair, FusionMode, Opinion};
use slargue::settings::{Settings, SettingsOverrides};
use slargue::source::{DirectOpinion, EdgeConditionals, OpinionSource};
use slargue::document::Document;

const TOL: f64 = 1e-9;

prop_compose! {
    fn opinion()(p in 0.0..=1.0f64, q in 0.0..=1.0f64, a in 0.01..0.99f64) -> Opinion {
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        Opinion::new(lo, hi - lo, 1.0 - hi, a).unwrap()
    }
}

fn sum_is_one(o: &Opinion) -> bool {
    (o.b() + o.d() + o.u() - 1.0).abs() <= TOL
}

proptest! {
    #[test]
    fn conjunction_is_commutative(x in opinion(), y in opinion()) {
        let (l, r) = (multiply(&x, &y).unwrap(), multiply(&y, &x).unwrap());
        assert_abs_diff_eq!(l.b(), r.b(), epsilon = TOL);
        assert_abs_diff_eq!(l.u(), r.u(), epsilon = TOL);
    }

    #[test]
    fn disjunction_is_commutative(x in opinion(), y in opinion()) {
        let (l, r) = (comultiply(&x, &y).unwrap(), comultiply(&y, &x).unwrap());
        assert_abs_diff_eq!(l.b(), r.b(), epsilon = TOL);
        assert_abs_diff_eq!(l.d(), r.d(), epsilon = TOL);
    }

    #[test]
    fn fusion_stays_on_simplex(x in opinion(), y in opinion(), g in 0.0..=1.0f64) {
        for m in [FusionMode::Cumulative { gamma: g }, FusionMode::Averaging, FusionMode::Weighted { gamma: g }] {
            let f = fuse(&x, &y, m);
            prop_assert!(sum_is_one(&f), "{m:?} {f:?}");
        }
    }

    #[test]
    fn deduction_projection_between_conditionals(x in opinion(), pos in opinion(), neg in opinion()) {
        let d = deduce(&x, &ConditionalPair::new(pos, neg));
        prop_assert!(sum_is_one(&d));
        let e = |c: &Opinion| c.b() + d.a() * c.u();
        let (lo, hi) = (e(&pos).min(e(&neg)), e(&pos).max(e(&neg)));
        prop_assert!(d.project() >= lo - TOL && d.project() <= hi + TOL);
    }

    #[test]
    fn document_round_trip_is_a_fixpoint(sn in opinion(), a1 in opinion(), pattern in 0usize..5) {
        let doc = small_document(sn, a1, pattern);
        let text = serialize_document(&doc);
        let again = parse_document(&text).unwrap();
        prop_assert_eq!(serialize_document(&again), text);
    }

    #[test]
    fn marginalized_opinions_are_proper(sn in opinion(), a1 in opinion(), pattern in 0usize..5) {
        let doc = small_document(sn, a1, pattern);
        let a = assess(&doc, None, &SettingsOverrides::default()).unwrap();
        for r in a.rows() {
            prop_assert!(sum_is_one(&r.opinion), "{}", r.id);
            prop_assert!(r.context_set.is_disjoint(&r.consumed_contexts));
        }
    }

    #[test]
    fn belief_sweep_is_monotone(sn in opinion(), fixed_u in 0.0..=1.0f64) {
        let doc = small_document(sn, Opinion::truth(0.5), 0);
        let spec = SweepSpec::new("A1", SweepMode::BeliefTradeoff { fixed_u }, 6);
        let rows = sweep(&doc, &spec, &SettingsOverrides::default(), Execution::Sequential).unwrap();
        for w in rows.windows(2) {
            prop_assert!(w[1].observed[0].projection >= w[0].observed[0].projection - TOL);
        }
    }
}

fn dop(o: &Opinion) -> OpinionSource {
    OpinionSource::Direct(DirectOpinion::new(o.b(), o.d(), o.u(), Some(o.a())).unwrap())
}

fn small_document(sn: Opinion, a1: Opinion, pattern: usize) -> Document {
    let kinds = [
        PatternKind::Conjunction,
        PatternKind::Disjunction,
        PatternKind::FusionCumulative,
        PatternKind::FusionAveraging,
        PatternKind::FusionWeighted,
    ];
    let warrant = EdgeConditionals::pair(
        DirectOpinion::new(0.9, 0.02, 0.08, None).unwrap(),
        DirectOpinion::new(0.05, 0.9, 0.05, None).unwrap(),
    );
    let nodes = vec![
        ArgNode::new("G1", NodeKind::Goal).statement("top"),
        ArgNode::new("A1", NodeKind::Assumption).input(dop(&a1)),
        ArgNode::new("S1", NodeKind::Strategy).pattern(kinds[pattern]),
        ArgNode::new("G2", NodeKind::Goal),
        ArgNode::new("Sn1", NodeKind::Solution).input(dop(&sn)),
        ArgNode::new("Sn2", NodeKind::Solution).input(OpinionSource::Qualitative("medium".into())),
    ];
    let edges = vec![
        ArgEdge::supported_by("G1", "S1").with_conditionals(warrant),
        ArgEdge::in_context_of("G1", "A1"),
        ArgEdge::supported_by("S1", "G2"),
        ArgEdge::supported_by("S1", "Sn2"),
        ArgEdge::supported_by("G2", "Sn1").with_conditionals(warrant),
    ];
    Document::new(ArgumentGraph::new(nodes, edges), Settings::default())
}
