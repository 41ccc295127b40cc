use std::collections::BTreeMap;

use proptest::prelude::*;
use shiftlab::dsl::parse_formula;
use shiftlab::logic::Alphabet;
use shiftlab::sft::Sft;
use shiftlab::topology::Topology;
use shiftlab_tiler::{NodeJson, Status, TilerError, TilerSession, Window};

fn square_sft(src: &str) -> Sft {
    Sft::from_formula(&Topology::builtin("square").unwrap(), &Alphabet::binary(), &parse_formula(src).unwrap()).unwrap()
}

fn golden() -> Sft {
    square_sft("Ao o = 1 -> (o.rt = 0 & o.up = 0)")
}

fn node(x: i32, y: i32) -> NodeJson {
    NodeJson { cell: vec![x, y], node: "0".into() }
}

#[test]
fn fresh_state() {
    let s = TilerSession::new("gm", golden()).unwrap();
    let st = s.state();
    assert!(st.pinned.is_empty() && st.filled.is_empty());
    assert_eq!(st.window, Window { origin: vec![0, 0], size: vec![16, 16] });
    assert_eq!(st.status, Status::Idle);
}

#[test]
fn hex_has_two_nodes_per_cell() {
    let hex = Sft::from_formula(
        &Topology::builtin("hex").unwrap(),
        &Alphabet::binary(),
        &parse_formula("Ao Ed[o1] d = 1").unwrap(),
    )
    .unwrap();
    let s = TilerSession::new("dom", hex).unwrap();
    assert_eq!(s.state().geometry.nodes_per_cell, 2);
    assert_eq!(s.state().geometry.offsets.len(), 2);
}

#[test]
fn pin_unpin_and_overwrite() {
    let mut s = TilerSession::new("gm", golden()).unwrap();
    s.pin(&node(0, 0), "1").unwrap();
    assert_eq!(s.state().pinned.len(), 1);
    s.unpin(&node(0, 0)).unwrap();
    assert!(s.state().pinned.is_empty());
    s.pin(&node(2, 2), "0").unwrap();
    s.pin(&node(2, 2), "1").unwrap();
    let st = s.state();
    assert_eq!(st.pinned.len(), 1);
    assert_eq!(st.pinned[0].symbol, "1");
}

#[test]
fn bad_pins() {
    let mut s = TilerSession::new("gm", golden()).unwrap();
    assert!(matches!(s.pin(&node(16, 0), "1"), Err(TilerError::OutOfWindow(_))));
    assert!(matches!(s.pin(&node(-1, 0), "1"), Err(TilerError::OutOfWindow(_))));
    assert!(matches!(s.pin(&node(0, 0), "7"), Err(TilerError::UnknownSymbol(_))));
    let bad = NodeJson { cell: vec![0], node: "0".into() };
    assert!(matches!(s.pin(&bad, "1"), Err(TilerError::CellShape { .. })));
}

#[test]
fn forced_zeros_around_a_one() {
    let mut s = TilerSession::new("gm", golden()).unwrap();
    s.pin(&node(5, 5), "1").unwrap();
    assert_eq!(s.complete().unwrap(), Status::Completed);
    let filled: BTreeMap<(i32, i32), String> =
        s.state().filled.into_iter().map(|a| ((a.node.cell[0], a.node.cell[1]), a.symbol)).collect();
    for c in [(4, 5), (6, 5), (5, 4), (5, 6)] {
        assert_eq!(filled[&c], "0");
    }
    assert!(s.sft().violations(&s.patch()).is_empty());
}

#[test]
fn adjacent_ones_are_unsatisfiable() {
    let mut s = TilerSession::new("gm", golden()).unwrap();
    s.pin(&node(3, 3), "1").unwrap();
    s.pin(&node(4, 3), "1").unwrap();
    assert_eq!(s.complete().unwrap(), Status::Unsatisfiable);
    assert_eq!(s.state().pinned.len(), 2);
    assert!(s.state().filled.is_empty());
}

#[test]
fn full_shift_always_completes() {
    let mut s = TilerSession::new("full", square_sft("Ao o = o")).unwrap();
    s.pin(&node(0, 0), "1").unwrap();
    s.pin(&node(1, 0), "1").unwrap();
    assert_eq!(s.complete().unwrap(), Status::Completed);
    assert_eq!(s.patch().len(), 256);
}

#[test]
fn resizing() {
    let mut s = TilerSession::new("gm", golden()).unwrap();
    s.pin(&node(10, 10), "1").unwrap();
    let dropped = s.resize(Window { origin: vec![0, 0], size: vec![32, 32] }).unwrap();
    assert!(dropped.is_empty());
    assert_eq!(s.state().pinned.len(), 1);
    let dropped = s.resize(Window { origin: vec![0, 0], size: vec![8, 8] }).unwrap();
    assert_eq!(dropped, vec![node(10, 10)]);
    assert!(s.state().pinned.is_empty());
    assert_eq!(s.resize(Window { origin: vec![0, 0], size: vec![0, 8] }), Err(TilerError::EmptyWindow));
    assert!(matches!(
        s.resize(Window { origin: vec![0, 0], size: vec![65, 64] }),
        Err(TilerError::TooLarge { .. })
    ));
}

#[derive(Clone, Debug)]
enum Op {
    Pin(i32, i32, bool),
    Unpin(i32, i32),
    Resize(i32, i32, u32, u32),
    Complete,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (-2..10i32, -2..10i32, any::<bool>()).prop_map(|(x, y, b)| Op::Pin(x, y, b)),
        (-2..10i32, -2..10i32).prop_map(|(x, y)| Op::Unpin(x, y)),
        (-2..4i32, -2..4i32, 0..9u32, 0..9u32).prop_map(|(x, y, w, h)| Op::Resize(x, y, w, h)),
        Just(Op::Complete),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // The session agrees with a plain map model; completions keep pins and are locally valid.
    #[test]
    fn matches_model(ops in prop::collection::vec(op(), 1..12)) {
        let mut s = TilerSession::new("gm", golden()).unwrap();
        s.resize(Window { origin: vec![0, 0], size: vec![8, 8] }).unwrap();
        let mut pins: BTreeMap<(i32, i32), String> = BTreeMap::new();
        let mut win = (0, 0, 8u32, 8u32);
        let inside = |w: (i32, i32, u32, u32), x: i32, y: i32| x >= w.0 && y >= w.1 && x < w.0 + w.2 as i32 && y < w.1 + w.3 as i32;
        for o in ops {
            match o {
                Op::Pin(x, y, b) => {
                    let sym = if b { "1" } else { "0" };
                    let r = s.pin(&node(x, y), sym);
                    prop_assert_eq!(r.is_ok(), inside(win, x, y));
                    if r.is_ok() { pins.insert((x, y), sym.to_string()); }
                }
                Op::Unpin(x, y) => {
                    s.unpin(&node(x, y)).unwrap();
                    pins.remove(&(x, y));
                }
                Op::Resize(x, y, w, h) => {
                    let r = s.resize(Window { origin: vec![x, y], size: vec![w, h] });
                    prop_assert_eq!(r.is_ok(), w > 0 && h > 0);
                    if r.is_ok() {
                        win = (x, y, w, h);
                        pins.retain(|&(a, b), _| inside(win, a, b));
                    }
                }
                Op::Complete => {
                    let st = s.complete().unwrap();
                    if st == Status::Completed {
                        let patch = s.patch();
                        prop_assert!(s.sft().violations(&patch).is_empty());
                        prop_assert_eq!(patch.len(), (win.2 * win.3) as usize);
                    }
                }
            }
            let got: BTreeMap<(i32, i32), String> =
                s.state().pinned.into_iter().map(|a| ((a.node.cell[0], a.node.cell[1]), a.symbol)).collect();
            prop_assert_eq!(&got, &pins);
        }
    }
}
