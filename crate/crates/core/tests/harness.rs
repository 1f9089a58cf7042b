use epirare::harness::{load_config, parse_config, run, sweep, Method, Overrides};

const CONFIG: &str = r#"
model = "reed_frost"
q = 0.95
s0 = 30
i0 = 1
event = "cumulative_infections"
t = 5
n_c = 10
seed = 9
replications = 50
particles = 200

[cmc]
method = "cmc"

[is]
method = "is"
instr_q = 0.9

[ce]
method = "ce"
iterations = 2

[potential]
method = "ibps"
keep_fraction = 0.8
alpha = 0.1
weight = "potential_delta_v"
"#;

#[test]
fn reed_frost_methods_agree() {
    let configs = parse_config(CONFIG, &Overrides::default()).unwrap();
    let rows: Vec<_> = configs.iter().map(|c| run(c).unwrap()).collect();
    let reference = &rows[0].estimate;
    for r in &rows[1..] {
        let se = (r.estimate.sem().powi(2) + reference.sem().powi(2)).sqrt();
        assert!(
            (r.estimate.value - reference.value).abs() <= 4.0 * se,
            "{}: {} vs {}",
            r.name,
            r.estimate.value,
            reference.value
        );
    }
}

#[test]
fn rows_are_ordered_and_deterministic() {
    let configs = parse_config(CONFIG, &Overrides::default()).unwrap();
    assert!(matches!(configs[1].method, Method::Is { .. }));
    let mut a = Vec::new();
    let mut b = Vec::new();
    let rows = sweep(&configs, false, &mut a).unwrap();
    sweep(&configs, false, &mut b).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        rows.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(),
        ["cmc", "is", "ce", "potential"]
    );
    assert!(rows.iter().all(|r| r.estimate.values.len() == 50));
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for (file, sections) in [("toy.toml", 5), ("hiv.toml", 3)] {
        let configs = load_config(&dir.join(file), &Overrides::default()).unwrap();
        assert_eq!(configs.len(), sections, "{file}");
    }
}
