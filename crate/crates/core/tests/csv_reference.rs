//! `read_csv` against a small hand-written RFC 4180 reader.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabvec::table::read_csv;

/// Character-level state machine: quoted fields may hold the delimiter,
/// line breaks and doubled quotes.
fn reference_parse(text: &str, delim: char) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut row = Vec::new();
    let mut field = String::new();
    let mut in_quotes = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if in_quotes {
            match c {
                '"' if chars.peek() == Some(&'"') => {
                    chars.next();
                    field.push('"');
                }
                '"' => in_quotes = false,
                _ => field.push(c),
            }
        } else if c == '"' {
            in_quotes = true;
        } else if c == delim {
            row.push(std::mem::take(&mut field));
        } else if c == '\n' {
            row.push(std::mem::take(&mut field));
            rows.push(std::mem::take(&mut row));
        } else if c != '\r' {
            field.push(c);
        }
    }
    if !field.is_empty() || !row.is_empty() {
        row.push(field);
        rows.push(row);
    }
    rows
}

fn quote(cell: &str) -> String {
    format!("\"{}\"", cell.replace('"', "\"\""))
}

#[test]
fn quoted_cells_match_reference_parser() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let pieces = ["plain", "with,comma", "semi;colon", "say \"hi\"", "", "multi\nline", "café", "  padded "];
    for delim in [',', ';'] {
        let mut text = String::from("id,name,notes\n").replace(',', &delim.to_string());
        for i in 0..20 {
            let cells: Vec<String> = [i.to_string(), pieces[rng.random_range(0..pieces.len())].to_string(), pieces[i % pieces.len()].to_string()]
                .into_iter()
                .map(|c| {
                    if c.contains(delim) || c.contains('"') || c.contains('\n') || rng.random_bool(0.3) {
                        quote(&c)
                    } else {
                        c
                    }
                })
                .collect();
            text.push_str(&cells.join(&delim.to_string()));
            text.push('\n');
        }
        let expected = reference_parse(&text, delim);
        let table = read_csv(text.as_bytes(), "t", delim as u8, true).unwrap();
        assert_eq!(table.headers(), &expected[0][..]);
        assert_eq!(table.n_rows(), 20);
        for (i, row) in expected[1..].iter().enumerate() {
            assert_eq!(table.row(i), row.iter().map(String::as_str).collect::<Vec<_>>(), "row {i}");
        }
    }
}
