//! Fixed-format numbers for reports. Every float is written with 17
//! significant digits in scientific notation, so identical runs produce
//! identical bytes and values round-trip exactly. Non-finite values are
//! spelled `inf`, `-inf` and `nan` (JSON strings in reports).

use dissim_core::C64;
use serde_json::{Number, Value};

/// `v` with 17 significant digits and a signed exponent, e.g.
/// `3.3333333333333331e-1`, `2.0000000000000000e+0` (the form serde_json
/// writes back for these numbers).
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.into();
    }
    let s = format!("{v:.16e}");
    match s.split_once('e') {
        Some((m, e)) if !e.starts_with('-') => format!("{m}e+{e}"),
        _ => s,
    }
}

pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::Number(fmt_f64(v).parse::<Number>().expect("formatted float is a JSON number"))
    } else {
        Value::String(fmt_f64(v))
    }
}

pub fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

/// `[re, im]`.
pub fn complex(z: C64) -> Value {
    Value::Array(vec![num(z.re), num(z.im)])
}

pub fn int(n: usize) -> Value {
    Value::Number(Number::from(n as u64))
}

/// Pretty JSON with a trailing newline.
pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

/// CSV with a header row. Cells are already formatted.
pub fn to_csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.1 + 0.2] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
        assert_eq!(fmt_f64(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e+0");
        assert_eq!(fmt_f64(1e10), "1.0000000000000000e+10");
    }

    #[test]
    fn json_keeps_the_format() {
        let v = serde_json::json!({"a": num(0.1), "b": num(f64::INFINITY), "c": int(3), "d": num(2.5)});
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"{"a":1.0000000000000001e-1,"b":"inf","c":3,"d":2.5000000000000000e+0}"#
        );
    }

    #[test]
    fn csv_quotes_when_needed() {
        let out = to_csv(&["a".into(), "b".into()], &[vec!["1".into(), "x, y".into()]]);
        assert_eq!(out, "a,b\n1,\"x, y\"\n");
    }
}
