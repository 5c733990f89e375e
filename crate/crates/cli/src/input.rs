//! POS-tagged sentence input.

use anyhow::{bail, Result};

pub type Sentence = Vec<(String, String)>;

/// One sentence per line, tokens written `word<delim>POS` and split at the
/// last delimiter. Blank lines are skipped.
pub fn read_tagged(text: &str, delimiter: &str) -> Result<Vec<Sentence>> {
    if delimiter.is_empty() {
        bail!("the POS delimiter must not be empty");
    }
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut sent = Vec::new();
        for item in line.split_whitespace() {
            match item.rsplit_once(delimiter) {
                Some((w, p)) if !w.is_empty() && !p.is_empty() => sent.push((w.to_string(), p.to_string())),
                _ => bail!("line {}: malformed token/POS pair `{item}`", idx + 1),
            }
        }
        out.push(sent);
    }
    Ok(out)
}

/// Two whitespace-separated columns, word then POS; blank lines end
/// sentences.
pub fn read_conll(text: &str) -> Result<Vec<Sentence>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        match cols.as_slice() {
            [] => {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
            }
            [w, p] => current.push((w.to_string(), p.to_string())),
            _ => bail!("line {}: expected two columns, found {}", idx + 1, cols.len()),
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagged_lines() {
        let s = read_tagged("She_PRP enjoys_VBZ ._.\n\nfoo_bar_NN\n", "_").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0][2], (".".to_string(), ".".to_string()));
        assert_eq!(s[1][0], ("foo_bar".to_string(), "NN".to_string()));
        assert!(read_tagged("", "_").unwrap().is_empty());
        let err = read_tagged("a_DT\nbad token_NN", "_").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(read_tagged("a/DT b/NN", "/").is_ok());
        assert!(read_tagged("_NN", "_").is_err());
    }

    #[test]
    fn conll_columns() {
        let s = read_conll("She PRP\nran VBD\n\n\nIt PRP\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].len(), 2);
        assert!(read_conll("a b c\n").unwrap_err().to_string().contains("line 1"));
    }
}
