use eventrisk::bounds::parse_bounds;
use eventrisk::covariates::{format_covariates, parse_covariates};
use eventrisk::region::{format_region, load_region, parse_region, MONTH_NAMES};
use eventrisk::AppError;
use eventrisk_core::{CountPanel, EventType, Scenario};

fn panel() -> CountPanel {
    CountPanel::new(
        vec![1990, 1991],
        vec![[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12], [0; 12]],
        vec![[0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 0, 50], [3; 12]],
        vec![50, 100],
    )
    .unwrap()
}

fn line_of(text: &str, needle: &str) -> usize {
    text.lines().position(|l| l.contains(needle)).unwrap() + 1
}

#[test]
fn region_round_trip_and_idempotence() {
    let p = panel();
    let text = format_region(&p, EventType::Wet);
    let back = parse_region(&text, "mem", EventType::Wet).unwrap();
    assert_eq!(back, p);
    assert_eq!(parse_region(&text, "mem", EventType::Wet).unwrap(), back);
    assert_eq!(back.n_years(), 2);
    assert!(parse_region(&text, "mem", EventType::Hot).is_err());
}

#[test]
fn permissive_reading() {
    // Space-delimited, quoted strings, R-style row names, shuffled columns,
    // rows out of order, other event types present.
    let mut text = String::from("\"year\" \"scenario\" \"event_type\" \"n_sims\"");
    for m in MONTH_NAMES {
        text.push_str(&format!(" \"{m}\""));
    }
    text.push('\n');
    let mut row = |name: &str, year: i32, scen: &str, ev: &str, n: u32, c: u32| {
        text.push_str(&format!("\"{name}\" {year} \"{scen}\" \"{ev}\" {n}"));
        for _ in 0..12 {
            text.push_str(&format!(" {c}"));
        }
        text.push('\n');
    };
    row("1", 2001, "NAT", "hot", 10, 1);
    row("2", 2000, "ALL", "hot", 10, 2);
    row("3", 2000, "NAT", "hot", 10, 3);
    row("4", 2001, "ALL", "hot", 10, 4);
    row("5", 2000, "ALL", "cold", 10, 0);
    let p = parse_region(&text, "mem", EventType::Hot).unwrap();
    assert_eq!(p.years(), [2000, 2001]);
    assert_eq!(p.count(Scenario::All, 0, 5), 2);
    assert_eq!(p.count(Scenario::Nat, 1, 11), 1);
}

fn expect_parse_error(text: &str, line: usize, column: Option<&str>) {
    match parse_region(text, "mem", EventType::Hot) {
        Err(AppError::Parse { line: l, column: c, .. }) => {
            assert_eq!(l, line);
            assert_eq!(c.as_deref(), column);
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn invalid_region_files() {
    let good = format_region(&panel(), EventType::Hot);

    let bad = good.replacen("1\t2\t3\t4\t5\t6\t7\t8\t9\t10\t11\t12\thot\tALL\t1990\t50", "51\t2\t3\t4\t5\t6\t7\t8\t9\t10\t11\t12\thot\tALL\t1990\t50", 1);
    expect_parse_error(&bad, 2, Some("january"));

    let bad = good.replace("hot\tNAT\t1991", "warm\tNAT\t1991");
    expect_parse_error(&bad, line_of(&good, "hot\tNAT\t1991"), Some("event_type"));

    let dup_line = good.lines().nth(1).unwrap();
    let bad = format!("{good}{dup_line}\n");
    expect_parse_error(&bad, good.lines().count() + 1, None);

    let bad: String = good
        .lines()
        .filter(|l| !l.contains("NAT\t1991"))
        .map(|l| format!("{l}\n"))
        .collect();
    assert!(matches!(parse_region(&bad, "mem", EventType::Hot), Err(AppError::InvalidData { .. })));

    // 1990 and 1992 with no 1991
    let gap = good.replace("\t1991\t", "\t1992\t");
    let err = parse_region(&gap, "mem", EventType::Hot).unwrap_err();
    assert!(err.to_string().contains("consecutive"), "{err}");

    let bad = good.replace("hot\tNAT\t1990\t50", "hot\tNAT\t1990\t60");
    expect_parse_error(&bad, line_of(&good, "hot\tNAT\t1990"), Some("n_sims"));

    let bad = good.replace("hot\tALL\t1990\t50", "hot\tALL\t1990\t50,0");
    expect_parse_error(&bad, 2, Some("n_sims"));

    for empty in ["", "\n\n", "# only a comment\n"] {
        let err = parse_region(empty, "mem", EventType::Hot).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}

#[test]
fn load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ABC-X.txt");
    std::fs::write(&path, format_region(&panel(), EventType::Cold)).unwrap();
    let (p, meta) = load_region(&path, EventType::Cold).unwrap();
    assert_eq!(p, panel());
    assert_eq!(meta.region, "ABC-X");
    assert_eq!(meta.rows_in_file, 4);
    let missing = load_region(&dir.path().join("none.txt"), EventType::Cold).unwrap_err();
    assert_eq!(missing.exit_code(), 3);
}

#[test]
fn covariate_files() {
    let years = [2000, 2001, 2002, 2003];
    let text = format_covariates(&years, &[0.1, 0.2, 0.4, 0.3], &[0.0, 0.1, -0.1, 0.05]).unwrap();
    let table = parse_covariates(&text, "gmt").unwrap();
    let covs = table.series_for(&years).unwrap();
    assert!(covs.is_standardized());
    let raw_only: String = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            format!("{}\t{}\t{}\n", f[0], f[1], f[3])
        })
        .collect();
    let from_raw = parse_covariates(&raw_only, "gmt").unwrap().series_for(&years).unwrap();
    for k in Scenario::BOTH {
        for t in 0..4 {
            assert!((from_raw.x(k, t) - covs.x(k, t)).abs() < 1e-12);
        }
    }

    assert!(matches!(table.series_for(&years[..3]), Err(AppError::Mismatch(_))));
    assert!(matches!(table.series_for(&[1, 2, 3, 4]), Err(AppError::Mismatch(_))));

    // Paper layout: no year column, space-delimited.
    let plain = "gmtA_raw gmtA gmtN_raw gmtN\n0.1 -1 0.0 -1\n0.3 1 0.2 1\n";
    let c = parse_covariates(plain, "gmt").unwrap().series_for(&[1, 2]).unwrap_err();
    assert_eq!(c.exit_code(), 4, "unit variance with n - 1 is sqrt(2) apart: {c}");
    let plain = format!("gmtA gmtN\n{} {}\n{} {}\n", -0.5f64.sqrt(), -0.5f64.sqrt(), 0.5f64.sqrt(), 0.5f64.sqrt());
    assert!(parse_covariates(&plain, "gmt").unwrap().series_for(&[1, 2]).is_ok());

    let comma = "gmtA gmtN\n-0,7 1\n0.7 -1\n";
    match parse_covariates(comma, "gmt") {
        Err(AppError::Parse { line, column, message, .. }) => {
            assert_eq!((line, column.as_deref()), (2, Some("gmta")));
            assert!(message.contains("comma"));
        }
        other => panic!("{other:?}"),
    }
    assert!(parse_covariates("year other\n1 2\n", "gmt").is_err());
}

#[test]
fn bounds_files() {
    let text = "region\thot_limits\tcold_limits\twet_limits\nUSA-C\t-12\t-15\t-10\nAUS\t-20\t-11.5\t-9\n";
    let b = parse_bounds(text, "lb").unwrap();
    assert_eq!(b.limit("AUS", EventType::Cold).unwrap(), 11.5);
    assert_eq!(b.limit("USA-C", EventType::Hot).unwrap(), 12.0);
    assert!(matches!(b.limit("EUR", EventType::Hot), Err(AppError::Mismatch(_))));
    let bad = text.replace("-11.5", "3");
    match parse_bounds(&bad, "lb") {
        Err(AppError::Parse { line, column, .. }) => assert_eq!((line, column.as_deref()), (3, Some("cold_limits"))),
        other => panic!("{other:?}"),
    }
}
