use mvanet_web::{feature_strip, jujube_rgba, plan_view};

#[test]
fn plan_view_lists_every_stage() {
    let v = plan_view("tiny", 32, true, "").unwrap();
    assert_eq!(v.name, "MvANet-1-tiny");
    assert_eq!(v.stages.len(), 8);
    assert_eq!(v.stages[2].units, "[1x1 46, 3x3 18] x1");
    assert_eq!(v.parameters, v.blocks.iter().map(|b| b.1).sum::<usize>());
}

#[test]
fn plan_view_applies_overrides_and_rejects_bad_ones() {
    let v = plan_view("tiny", 32, false, "k3=32").unwrap();
    assert_eq!(v.name, "MvTNet-1-tiny");
    assert!(v.stages[4].units.contains("3x3 32"));
    assert!(plan_view("tiny", 32, true, "k9=1").is_err());
    assert!(plan_view("mv7", 32, true, "").is_err());
}

#[test]
fn rendered_frame_is_rgba_and_deterministic() {
    let a = jujube_rgba(1, 42, 0, 48).unwrap();
    assert_eq!(a.len(), 48 * 48 * 4);
    assert!(a.chunks_exact(4).all(|p| p[3] == 255));
    assert_eq!(a, jujube_rgba(1, 42, 0, 48).unwrap());
    assert_ne!(a, jujube_rgba(2, 42, 0, 48).unwrap());
    assert!(jujube_rgba(9, 42, 0, 48).is_err());
}

#[test]
fn feature_strip_has_five_maps() {
    let s = feature_strip(3, 1, 0, 0).unwrap();
    assert_eq!(s.len(), 5 * 16 * 16 * 4);
}
