//! Deterministic JSON rendering with every float at 17 significant
//! digits, so reports round-trip exactly and repeated runs are
//! byte-identical.

use serde_json::Value;

pub fn render(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, &mut out);
    out
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n.as_f64().unwrap();
                write_float(f, out);
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                indent(depth + 1, out);
                write_value(item, depth + 1, out);
            }
            out.push('\n');
            indent(depth, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                indent(depth + 1, out);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(item, depth + 1, out);
            }
            out.push('\n');
            indent(depth, out);
            out.push('}');
        }
    }
}

fn write_float(f: f64, out: &mut String) {
    if f == f.trunc() && f.abs() < 1e15 {
        // integral value: keep it readable but unambiguous as a float
        out.push_str(&format!("{f:.1}"));
    } else {
        // 17 significant digits round-trip any f64 exactly
        out.push_str(&format!("{f:.16e}"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        let v = serde_json::json!({ "a": 0.1, "b": 2.0, "c": [1, -3] });
        let text = render(&v);
        assert!(text.contains("1.0000000000000001e-1"));
        assert!(text.contains("2.0"));
        assert!(text.contains("-3"));
    }

    #[test]
    fn round_trip_exact() {
        for &f in &[std::f64::consts::PI, 1.0 / 3.0, 6.02e23, -1.23456789e-7] {
            let mut s = String::new();
            write_float(f, &mut s);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, f);
        }
    }
}
