use dtaboot::input::{parse_dataset, ParseError};
use proptest::prelude::*;

fn study() -> impl Strategy<Value = (u64, u64, u64, u64, Option<String>)> {
    (0u64..500, 0u64..500, 0u64..500, 0u64..500, prop::option::of("[A-Z]{1,4}"))
        .prop_filter("non-empty arms", |(tp, fp, fn_, tn, _)| tp + fn_ > 0 && fp + tn > 0)
}

proptest! {
    #[test]
    fn written_rows_parse_back(rows in prop::collection::vec(study(), 1..30), comment_every in 1usize..6) {
        let with_test = rows.iter().any(|r| r.4.is_some());
        let mut text = String::from("# generated\n");
        text.push_str(if with_test { "study,TP,FP,FN,TN,test\n" } else { "study,TP,FP,FN,TN\n" });
        for (i, (tp, fp, fn_, tn, g)) in rows.iter().enumerate() {
            if i % comment_every == 0 {
                text.push_str("# note\n");
            }
            text.push_str(&format!("s{i},{tp},{fp},{fn_},{tn}"));
            if with_test {
                text.push(',');
                text.push_str(g.as_deref().unwrap_or(""));
            }
            text.push('\n');
        }
        let d = parse_dataset(text.as_bytes(), "p").unwrap();
        prop_assert_eq!(d.len(), rows.len());
        for (s, (tp, fp, fn_, tn, g)) in d.studies().iter().zip(&rows) {
            prop_assert_eq!((s.tp, s.fp, s.fn_, s.tn), (*tp, *fp, *fn_, *tn));
            prop_assert_eq!(s.test_group.as_ref(), g.as_ref());
        }
    }

    #[test]
    fn error_line_points_at_bad_row(good in 0usize..20, comments in 0usize..4) {
        let mut text = String::from("# c\n");
        text.push_str(&"# more\n".repeat(comments));
        text.push_str("study,TP,FP,FN,TN\n");
        for i in 0..good {
            text.push_str(&format!("s{i},1,2,3,4\n"));
        }
        text.push_str("bad,1,-2,3,4\n");
        let expected = (1 + comments + 1 + good + 1) as u64;
        match parse_dataset(text.as_bytes(), "p") {
            Err(ParseError::Negative { line }) => prop_assert_eq!(line, expected),
            other => prop_assert!(false, "unexpected {:?}", other.map(|d| d.len())),
        }
    }
}
