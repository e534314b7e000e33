use std::collections::{BTreeMap, BTreeSet};

use hypodb_core::algebra::{self, conf, join, possible, project, repair_key, select, union_all, CmpOp, Operand, Predicate, ZeroWeight};
use hypodb_core::relation::{Attribute, Tuple, URelation, Value};
use hypodb_core::worldset::{Assignment, Descriptor, VarId, WorldTable};
use proptest::prelude::*;

fn arb_world() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec((1usize..=4).prop_flat_map(|n| prop::collection::vec(0.05f64..1.0, n)), 1..=6)
}

fn world_of(weights: &[Vec<f64>]) -> WorldTable {
    let mut w = WorldTable::new();
    for ws in weights {
        w.register_variable(ws.len(), ws).unwrap();
    }
    w
}

/// A consistent descriptor over the variables of `sizes` (ids 1..).
fn arb_descriptor(sizes: Vec<usize>) -> impl Strategy<Value = Descriptor> {
    let picks: Vec<_> = sizes.iter().map(|&n| prop::option::weighted(0.4, 1..=n as u32)).collect();
    picks.prop_map(|vals| Descriptor::new(vals.iter().enumerate().filter_map(|(i, v)| v.map(|v| Assignment::new(VarId(i as u32 + 1), v)))))
}

fn arb_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Descriptor>)> {
    arb_world().prop_flat_map(|ws| {
        let sizes: Vec<usize> = ws.iter().map(Vec::len).collect();
        (Just(ws), prop::collection::vec(arb_descriptor(sizes), 0..6))
    })
}

fn enumerated(world: &WorldTable, ds: &[Descriptor]) -> f64 {
    let vars: BTreeSet<VarId> = world.variables().map(|(v, _)| v).collect();
    world
        .enumerate_worlds(&vars)
        .unwrap()
        .into_iter()
        .filter(|(assign, _)| {
            let w: BTreeMap<VarId, u32> = assign.iter().map(|a| (a.var, a.value)).collect();
            ds.iter().any(|d| d.holds_in(&w))
        })
        .map(|(_, p)| p)
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn event_probability_matches_enumeration((ws, ds) in arb_instance()) {
        let world = world_of(&ws);
        let exact = world.event_probability(&ds).unwrap();
        let oracle = enumerated(&world, &ds);
        prop_assert!((exact - oracle).abs() <= 1e-12, "{exact} vs {oracle}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn marginals_are_normalized(ws in arb_world()) {
        let world = world_of(&ws);
        prop_assert!(world.is_normalized());
        for (_, v) in world.variables() {
            prop_assert!((v.marginals().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn extension_never_increases_probability((ws, ds) in arb_instance(), var in 0usize..6, value in 1u32..=4) {
        let world = world_of(&ws);
        let var = var % ws.len();
        let value = (value - 1) % ws[var].len() as u32 + 1;
        for d in &ds {
            let a = Assignment::new(VarId(var as u32 + 1), value);
            let ext = d.union(&Descriptor::new([a]));
            let p = world.descriptor_probability(d).unwrap();
            let q = if ext.is_consistent() { world.descriptor_probability(&ext).unwrap() } else { 0.0 };
            prop_assert!(q <= p + 1e-15);
        }
    }

    #[test]
    fn all_values_of_a_variable_cover_every_world(ws in arb_world(), var in 0usize..6) {
        let world = world_of(&ws);
        let var = var % ws.len();
        let ds: Vec<Descriptor> = (1..=ws[var].len() as u32).map(|i| Descriptor::single(VarId(var as u32 + 1), i)).collect();
        prop_assert!((world.event_probability(&ds).unwrap() - 1.0).abs() < 1e-9);
    }
}

fn rel(name: &str, attrs: &[&str], rows: &[(Vec<i64>, Descriptor)]) -> URelation {
    let mut r = URelation::new(name, attrs.iter().map(|a| Attribute::numeric(*a)).collect());
    for (vals, d) in rows {
        r.push(Tuple::new(vals.iter().map(|&v| Value::num(v as f64)).collect(), d.clone()));
    }
    r
}

type Rows = Vec<(Vec<i64>, Descriptor)>;

fn arb_rows(sizes: Vec<usize>, arity: usize) -> impl Strategy<Value = Rows> {
    prop::collection::vec((prop::collection::vec(0i64..3, arity), arb_descriptor(sizes)), 0..6)
}

fn arb_relations() -> impl Strategy<Value = (Vec<Vec<f64>>, [Rows; 3])> {
    arb_world().prop_flat_map(|ws| {
        let sizes: Vec<usize> = ws.iter().map(Vec::len).collect();
        (Just(ws), [arb_rows(sizes.clone(), 2), arb_rows(sizes.clone(), 2), arb_rows(sizes, 2)])
    })
}

fn descriptor_set(r: &URelation) -> BTreeSet<(Vec<Value>, Descriptor)> {
    // Column order differs between the two join trees; compare values sorted
    // by attribute name.
    let mut order: Vec<(String, usize)> = r.attribute_names().map(str::to_string).zip(0..).collect();
    order.sort();
    r.tuples().iter().map(|t| (order.iter().map(|(_, i)| t.values[*i].clone()).collect(), t.descriptor.clone())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn join_is_associative((_, [a, b, c]) in arb_relations()) {
        let a = rel("A", &["k", "a"], &a);
        let b = rel("B", &["k2", "b"], &b);
        let c = rel("C", &["k3", "c"], &c);
        let left = join(&join(&a, &b, &[("k", "k2")]).unwrap(), &c, &[("k", "k3")]).unwrap();
        let right = join(&a, &join(&b, &c, &[("k2", "k3")]).unwrap(), &[("k", "k2")]).unwrap();
        prop_assert_eq!(descriptor_set(&left), descriptor_set(&right));
        prop_assert!(left.tuples().iter().all(|t| t.descriptor.is_consistent()));
    }

    #[test]
    fn repair_key_normalizes_each_group(rows in prop::collection::vec((0i64..3, 0i64..4, 1u32..20), 1..12)) {
        let mut r = URelation::new("R", vec![Attribute::numeric("k"), Attribute::numeric("v"), Attribute::numeric("w")]);
        let mut seen = BTreeSet::new();
        let mut totals: BTreeMap<(i64, i64), f64> = BTreeMap::new();
        let mut group: BTreeMap<i64, f64> = BTreeMap::new();
        for (k, v, w) in rows {
            if seen.insert((k, v)) {
                r.push(Tuple::certain(vec![Value::num(k as f64), Value::num(v as f64), Value::num(w as f64)]));
                totals.insert((k, v), w as f64);
                *group.entry(k).or_default() += w as f64;
            }
        }
        let mut world = WorldTable::new();
        let rep = repair_key(&r, &["k"], "w", &mut world, ZeroWeight::Keep).unwrap();
        for (_, p) in conf(&rep.relation, &["k"], &world).unwrap() {
            prop_assert!((p - 1.0).abs() < 1e-9);
        }
        for (kv, p) in conf(&rep.relation, &["k", "v"], &world).unwrap() {
            let key = (kv[0].as_f64().unwrap() as i64, kv[1].as_f64().unwrap() as i64);
            prop_assert!((p - totals[&key] / group[&key.0]).abs() < 1e-9);
        }
        for v in &rep.variables {
            let m = world.variable(v.var).unwrap().marginals();
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn conf_satisfies_the_union_bound((ws, [rows, _, _]) in arb_relations()) {
        let world = world_of(&ws);
        let r = rel("R", &["g", "x"], &rows);
        let whole: f64 = world.event_probability(&r.tuples().iter().map(|t| t.descriptor.clone()).collect::<Vec<_>>()).unwrap();
        let parts = conf(&r, &["g"], &world).unwrap();
        let sum: f64 = parts.iter().map(|(_, p)| p).sum();
        prop_assert!(sum >= whole - 1e-12);
        let groups: BTreeMap<Value, Vec<Descriptor>> = r.tuples().iter().fold(BTreeMap::new(), |mut m, t| {
            m.entry(t.values[0].clone()).or_default().push(t.descriptor.clone());
            m
        });
        let disjoint = groups.values().enumerate().all(|(i, a)| {
            groups.values().skip(i + 1).all(|b| a.iter().all(|x| b.iter().all(|y| x.excludes(y))))
        });
        if disjoint {
            prop_assert!((sum - whole).abs() < 1e-12);
        }
    }

    #[test]
    fn operators_commute_with_possible((ws, [a, b, _]) in arb_relations(), zero in 0usize..6, pivot in 0i64..3) {
        // One variable may carry a zero-weight value, so some tuples are
        // impossible.
        let mut ws = ws;
        let z = zero % ws.len();
        ws[z][0] = 0.0;
        if ws[z].len() == 1 {
            ws[z].push(1.0);
        }
        let mut world = WorldTable::new();
        for w in &ws {
            world.register_variable(w.len(), w).unwrap();
        }
        let a = rel("A", &["k", "x"], &a);
        let b = rel("A", &["k", "x"], &b);
        let pred = Predicate::always().and("k", CmpOp::Le, Operand::Const(Value::num(pivot as f64)));
        prop_assert_eq!(
            possible(&select(&a, &pred).unwrap(), &world),
            select(&possible(&a, &world), &pred).unwrap()
        );
        prop_assert_eq!(
            possible(&project(&a, &["x"], false).unwrap(), &world),
            project(&possible(&a, &world), &["x"], false).unwrap()
        );
        prop_assert_eq!(
            possible(&union_all("U", &[&a, &b]).unwrap(), &world),
            union_all("U", &[&possible(&a, &world), &possible(&b, &world)]).unwrap()
        );
    }
}

#[test]
fn group_count_feeds_repair_key() {
    let mut r = URelation::new("H1_INPUT", vec![Attribute::id("phi"), Attribute::numeric("g")]);
    for g in [32.0, 32.0, 32.0, 32.2, 32.2, 32.2] {
        r.push(Tuple::certain(vec![Value::Id(1), Value::num(g)]));
    }
    let counts = algebra::group_count(&r, &["phi", "g"], "Fr").unwrap();
    let mut world = WorldTable::new();
    let rep = repair_key(&counts, &["phi"], "Fr", &mut world, ZeroWeight::Keep).unwrap();
    assert_eq!(rep.relation.len(), 2);
    assert_eq!(world.variable(VarId(1)).unwrap().marginals(), [0.5, 0.5]);
}
