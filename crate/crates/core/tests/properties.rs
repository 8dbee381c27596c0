//! Randomized checks of the algebraic guarantees the unit suites only
//! sample: ordering laws, consolidation semantics, matcher equivalence
//! between the batch and streaming engines, and pipeline results being
//! independent of channel sizing.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spanforge_core::accel::{Pipeline, PipelineConfig};
use spanforge_core::aql;
use spanforge_core::dict::{AcAutomaton, Dictionary};
use spanforge_core::document::DocText;
use spanforge_core::operators::{consolidate, GraphRun, PreparedGraph};
use spanforge_core::partition::{plan_for_scenario, CapabilitySet, Scenario};
use spanforge_core::regex::CompiledRegex;
use spanforge_core::span::Span;
use spanforge_core::table::{canonical_cmp, AnnotationSet, ColumnType, Schema, Tuple, Value};

fn span_strategy() -> impl Strategy<Value = Span> {
    (0u32..48, 0u32..16).prop_map(|(b, len)| Span::new(b, b + len))
}

fn mixed_schema() -> Arc<Schema> {
    Arc::new(Schema::new(vec![
        ("match".to_string(), ColumnType::Span),
        ("n".to_string(), ColumnType::Int),
        ("x".to_string(), ColumnType::Float),
    ]))
}

fn mixed_tuple() -> impl Strategy<Value = Tuple> {
    (
        span_strategy(),
        -4i64..4,
        prop_oneof![Just(f64::NAN), Just(-0.0), Just(1.5), any::<i8>().prop_map(f64::from)],
    )
        .prop_map(|(s, n, x)| vec![Value::Span(s), Value::Int(n), Value::Float(x)])
}

proptest! {
    /// `canonical_cmp` must be a total order even with NaN floats in play,
    /// otherwise sorting is unstable across runs and engines.
    #[test]
    fn canonical_cmp_is_a_total_order(
        a in mixed_tuple(),
        b in mixed_tuple(),
        c in mixed_tuple(),
    ) {
        let schema = mixed_schema();
        let cmp = |x: &Tuple, y: &Tuple| canonical_cmp(&schema, x, y);
        prop_assert_eq!(cmp(&a, &a), Ordering::Equal);
        prop_assert_eq!(cmp(&a, &b), cmp(&b, &a).reverse());
        if cmp(&a, &b) != Ordering::Greater && cmp(&b, &c) != Ordering::Greater {
            prop_assert_ne!(cmp(&a, &c), Ordering::Greater);
        }
    }

    /// Sorting is deterministic and idempotent.
    #[test]
    fn canonical_sort_is_idempotent(tuples in proptest::collection::vec(mixed_tuple(), 0..40)) {
        let mut set = AnnotationSet::from_tuples(mixed_schema(), tuples);
        set.sort_canonical();
        let once = set.clone();
        set.sort_canonical();
        prop_assert_eq!(set.tuples(), once.tuples());
        prop_assert!(once.is_canonically_sorted());
    }

    /// A tuple survives consolidation exactly when no other tuple's span
    /// strictly contains its span, and consolidation is idempotent.
    #[test]
    fn consolidate_keeps_exactly_the_uncontained(
        tuples in proptest::collection::vec(mixed_tuple(), 0..30),
    ) {
        let input = AnnotationSet::from_tuples(mixed_schema(), tuples);
        let spans: Vec<Span> = input.tuples().iter().map(|t| t[0].as_span().unwrap()).collect();
        let got = consolidate(&input).unwrap();
        let expected: Vec<Tuple> = input
            .tuples()
            .iter()
            .zip(&spans)
            .filter(|(_, s)| !spans.iter().any(|o| o.strictly_contains(s)))
            .map(|(t, _)| t.clone())
            .collect();
        prop_assert_eq!(got.tuples(), &expected[..]);
        let again = consolidate(&got).unwrap();
        prop_assert_eq!(again.tuples(), got.tuples());
    }

    /// Union is a bag union: input order must not leak into the canonical
    /// form of the result.
    #[test]
    fn concatenation_order_is_invisible_after_canonical_sort(
        parts in proptest::collection::vec(
            proptest::collection::vec(mixed_tuple(), 0..12), 2..5,
        ),
        seed in any::<u64>(),
    ) {
        let schema = mixed_schema();
        let flat: Vec<Tuple> = parts.iter().flatten().cloned().collect();
        let mut shuffled = parts.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        shuffled.shuffle(&mut rng);
        for p in &mut shuffled {
            p.shuffle(&mut rng);
        }
        let flat2: Vec<Tuple> = shuffled.into_iter().flatten().collect();
        let mut a = AnnotationSet::from_tuples(Arc::clone(&schema), flat);
        let mut b = AnnotationSet::from_tuples(schema, flat2);
        a.sort_canonical();
        b.sort_canonical();
        prop_assert_eq!(a.tuples(), b.tuples());
    }
}

/// Small generator of syntactically valid patterns over a narrow alphabet,
/// so random texts actually hit them.
fn pattern_strategy() -> impl Strategy<Value = String> {
    let atom = prop_oneof![
        Just("[ab]".to_string()),
        Just("[a-c]".to_string()),
        Just("[0-9]".to_string()),
        Just("a".to_string()),
        Just("b".to_string()),
        Just("c0".to_string()),
        Just("(ab|ba)".to_string()),
        Just("[^c]".to_string()),
    ];
    let quantified = (atom, prop_oneof![
        Just(""), Just("+"), Just("*"), Just("?"), Just("{2}"), Just("{1,3}"),
    ])
        .prop_map(|(a, q)| format!("{a}{q}"));
    proptest::collection::vec(quantified, 1..4).prop_map(|parts| parts.concat())
}

fn text_strategy() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop_oneof![
            Just('a'), Just('b'), Just('c'), Just('0'), Just('1'), Just(' '), Just('é'),
        ],
        0..60,
    )
    .prop_map(|cs| cs.into_iter().collect())
}

proptest! {
    /// Feeding the stream matcher one char at a time must reproduce the
    /// batch scan exactly: same spans, same order.
    #[test]
    fn regex_stream_matches_batch(pattern in pattern_strategy(), text in text_strategy()) {
        let re = CompiledRegex::compile(&pattern, 4096).unwrap();
        let chars: Vec<char> = text.chars().collect();
        let batch = re.find_leftmost_longest(&chars);
        let mut matcher = re.matcher();
        let mut streamed = Vec::new();
        for &c in &chars {
            matcher.on_char(c);
            while let Some(s) = matcher.pop_match() {
                streamed.push(s);
            }
        }
        matcher.on_eof();
        while let Some(s) = matcher.pop_match() {
            streamed.push(s);
        }
        prop_assert_eq!(streamed, batch);
        }

    /// Same equivalence for the dictionary automaton. Stream emission order
    /// is by match end, which for whole-token hits equals the batch order.
    #[test]
    fn dict_stream_matches_batch(
        entries in proptest::collection::btree_set(
            prop_oneof![
                Just("ab"), Just("ba"), Just("abc"), Just("a"), Just("c0c"), Just("b1"),
            ],
            1..5,
        ),
        text in text_strategy(),
    ) {
        let dict = Dictionary::new("d", entries.iter().copied());
        let chars: Vec<char> = text.chars().collect();
        let batch = dict.find_matches(&chars);
        let ac = AcAutomaton::build(&dict);
        let mut matcher = ac.matcher();
        let mut streamed = Vec::new();
        for &c in &chars {
            matcher.on_char(c);
            while let Some(s) = matcher.pop_match() {
                streamed.push(s);
            }
        }
        matcher.on_eof();
        while let Some(s) = matcher.pop_match() {
            streamed.push(s);
        }
        prop_assert_eq!(streamed, batch);
    }
}

/// Pipeline results must not depend on how generously the channels are
/// sized, and must agree with the software reference on every output.
#[test]
fn pipeline_results_are_channel_capacity_invariant() {
    let graph = aql::compile(
        "create dictionary Cities as ('york', 'reno', 'omaha');\n\
         create view Caps as extract regex /[A-Z][a-z]+/ on Document;\n\
         create view Nums as extract regex /[0-9]+/ on Document;\n\
         create view Place as extract dictionary Cities on Document;\n\
         create view Hits as union all Caps, Nums, Place;\n\
         create view Near as join Caps c, Place p on follows(c.match, p.match, 0, 30);\n\
         output view Hits;\n\
         output view Near;",
    )
    .unwrap();
    let plan = plan_for_scenario(&graph, &CapabilitySet::standard(), Scenario::FullOffload)
        .unwrap();
    assert_eq!(plan.subgraphs.len(), 1, "tiers this small fuse into one subgraph");
    let sub = &plan.subgraphs[0];

    let prepared = PreparedGraph::new(graph.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let words = ["york", "reno", "Alice", "omaha", "12", "blue", "Bob", "7", "stone"];
    for _ in 0..40 {
        let n = rng.gen_range(0..24);
        let text: String = (0..n)
            .map(|_| *words.choose(&mut rng).unwrap())
            .collect::<Vec<_>>()
            .join(" ");
        let doc = DocText::new("d", text);

        let mut reference: Option<BTreeMap<_, _>> = None;
        for capacity in [1usize, 2, 7, 64] {
            let cfg = PipelineConfig { channel_capacity: capacity, ..PipelineConfig::default() };
            let pipeline = Pipeline::build(&plan.graph, sub, &cfg).unwrap();
            let result = pipeline.run_doc(&doc, &BTreeMap::new()).unwrap();
            match &reference {
                None => reference = Some(result.outputs.clone()),
                Some(r) => assert_eq!(&result.outputs, r, "capacity {capacity}"),
            }
        }

        let mut run = GraphRun::new(&prepared, &doc);
        for &id in prepared.topo() {
            run.eval_node(id).unwrap();
        }
        for &out in &sub.outputs {
            let mut want = run.result(out).unwrap().clone();
            want.sort_canonical();
            let mut got = reference.as_ref().unwrap()[&out].clone();
            got.sort_canonical();
            assert_eq!(got, want, "node {out}");
        }
    }
}
