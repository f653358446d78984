//! Text forms: group specs (`free:2`, `zd:3`, `fpc:2,3`), elements
//! (`ab^-1`, `(1,-2)`, `e`), and multiset literals (`[a,a^-1,b,b^-1]`,
//! `std`, with an optional power suffix `^n`).

use crate::error::{Error, Result};
use crate::group::multiset::GeneratorMultiset;
use crate::group::{Family, GroupContext, GroupElement};

pub fn parse_group_spec(spec: &str) -> Result<GroupContext> {
    let spec = spec.trim();
    let (kind, args) = spec
        .split_once(':')
        .ok_or_else(|| Error::Argument(format!("group spec {spec:?} needs kind:args")))?;
    let parse_usize = |s: &str, what: &str| -> Result<usize> {
        s.trim()
            .parse()
            .map_err(|_| Error::Argument(format!("bad {what} in group spec {spec:?}")))
    };
    match kind.trim() {
        "free" => GroupContext::new(Family::Free {
            rank: parse_usize(args, "rank")?,
        }),
        "zd" => GroupContext::new(Family::ZPower {
            dim: parse_usize(args, "dimension")?,
        }),
        "fpc" => {
            let orders = args
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<u32>()
                        .map_err(|_| Error::Argument(format!("bad order in group spec {spec:?}")))
                })
                .collect::<Result<Vec<u32>>>()?;
            GroupContext::new(Family::FreeProductCyclic { orders })
        }
        other => Err(Error::Argument(format!("unknown group family {other:?}"))),
    }
}

/// Canonical text of a group context, inverse of [`parse_group_spec`].
pub fn format_group_spec(ctx: &GroupContext) -> String {
    match ctx.family() {
        Family::Free { rank } => format!("free:{rank}"),
        Family::ZPower { dim } => format!("zd:{dim}"),
        Family::FreeProductCyclic { orders } => {
            let body: Vec<String> = orders.iter().map(|o| o.to_string()).collect();
            format!("fpc:{}", body.join(","))
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(s: &'a str) -> Self {
        Cursor {
            bytes: s.as_bytes(),
            pos: 0,
        }
    }

    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b' ' || b == b'\t' || b == b'*' {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek();
        if b.is_some() {
            self.pos += 1;
        }
        b
    }

    fn at_end(&mut self) -> bool {
        self.skip_separators();
        self.pos >= self.bytes.len()
    }

    fn integer(&mut self) -> Result<i64> {
        let start = self.pos;
        if matches!(self.peek(), Some(b'+') | Some(b'-')) {
            self.pos += 1;
        }
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse()
            .map_err(|_| Error::Argument(format!("expected integer at {:?}", text)))
    }

    /// `^<int>` if present, else 1.
    fn exponent(&mut self) -> Result<i64> {
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.integer()
        } else {
            Ok(1)
        }
    }
}

pub fn parse_element(ctx: &GroupContext, s: &str) -> Result<GroupElement> {
    let trimmed = s.trim();
    if trimmed.is_empty() {
        return Err(Error::Argument("empty element string".into()));
    }
    if trimmed == "e" {
        return Ok(ctx.identity());
    }
    match ctx.family() {
        Family::ZPower { dim } => parse_zd_element(ctx, *dim, trimmed),
        _ => parse_word_element(ctx, trimmed),
    }
}

fn parse_zd_element(_ctx: &GroupContext, dim: usize, s: &str) -> Result<GroupElement> {
    let mut cur = Cursor::new(s);
    cur.skip_separators();
    if cur.peek() == Some(b'(') {
        cur.bump();
        let mut coords = Vec::with_capacity(dim);
        loop {
            cur.skip_separators();
            coords.push(cur.integer()?);
            cur.skip_separators();
            match cur.bump() {
                Some(b',') => continue,
                Some(b')') => break,
                _ => return Err(Error::Argument(format!("unterminated vector in {s:?}"))),
            }
        }
        if !cur.at_end() {
            return Err(Error::Argument(format!("trailing input in {s:?}")));
        }
        if coords.len() != dim {
            return Err(Error::Argument(format!(
                "vector {s:?} has {} coordinates, context expects {dim}",
                coords.len()
            )));
        }
        return Ok(GroupElement::vector(coords));
    }
    // Word form over e1..ed, e.g. "e1^3e2^-1".
    let mut coords = vec![0i64; dim];
    while !cur.at_end() {
        if cur.bump() != Some(b'e') {
            return Err(Error::Argument(format!(
                "expected basis generator eK or (v1,..) in {s:?}"
            )));
        }
        let idx = cur.integer()?;
        if idx < 1 || idx as usize > dim {
            return Err(Error::Argument(format!(
                "basis index e{idx} out of range 1..={dim} in {s:?}"
            )));
        }
        let exp = cur.exponent()?;
        let slot = &mut coords[(idx - 1) as usize];
        *slot = slot
            .checked_add(exp)
            .ok_or_else(|| Error::Range("coordinate overflow".into()))?;
    }
    Ok(GroupElement::vector(coords))
}

fn parse_word_element(ctx: &GroupContext, s: &str) -> Result<GroupElement> {
    let mut cur = Cursor::new(s);
    let mut units = Vec::new();
    while !cur.at_end() {
        let letter = cur.bump().unwrap();
        if !letter.is_ascii_lowercase() || letter == b'e' {
            return Err(Error::Argument(format!(
                "bad generator letter {:?} in {s:?} ('e' is the identity and must stand alone)",
                letter as char
            )));
        }
        let gen = super::ALPHABET
            .iter()
            .position(|&c| c == letter)
            .filter(|&i| i < ctx.generator_count())
            .ok_or_else(|| {
                Error::Argument(format!(
                    "generator {:?} not in context {}",
                    letter as char,
                    format_group_spec(ctx)
                ))
            })?;
        let exp = cur.exponent()?;
        units.push(super::Syllable {
            gen: gen as u16,
            exp,
        });
    }
    ctx.from_units(&units)
}

/// A parsed multiset expression: base entries and the power to raise to.
#[derive(Debug, Clone)]
pub struct MultisetSpec {
    pub base: GeneratorMultiset,
    pub power: u32,
}

/// `std`, `[w1, w2, ...]`, either with an optional `^n` suffix.
pub fn parse_multiset_spec(ctx: &GroupContext, s: &str) -> Result<MultisetSpec> {
    let s = s.trim();
    let (body, power) = match s.rfind('^') {
        // Only treat `^` as the power suffix when it follows `]` or `std`.
        Some(i) if s[..i].trim_end().ends_with(']') || s[..i].trim_end() == "std" => {
            let n: u32 = s[i + 1..]
                .trim()
                .parse()
                .map_err(|_| Error::Argument(format!("bad power suffix in {s:?}")))?;
            if n == 0 {
                return Err(Error::Range("multiset power must be >= 1".into()));
            }
            (s[..i].trim_end(), n)
        }
        _ => (s, 1),
    };
    let base = if body == "std" {
        ctx.standard_symmetric()
    } else if body.starts_with('[') && body.ends_with(']') {
        let inner = &body[1..body.len() - 1];
        let mut entries = Vec::new();
        for piece in split_top_level(inner) {
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            entries.push(parse_element(ctx, piece)?);
        }
        if entries.is_empty() {
            return Err(Error::Argument("empty multiset literal".into()));
        }
        GeneratorMultiset::new(entries)
    } else {
        return Err(Error::Argument(format!(
            "multiset spec {s:?} must be `std` or a bracketed literal"
        )));
    };
    Ok(MultisetSpec { base, power })
}

/// Splits on commas that are not inside parentheses (zd vectors have commas).
fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_specs_round_trip() {
        for spec in ["free:2", "zd:3", "fpc:2,3"] {
            let ctx = parse_group_spec(spec).unwrap();
            assert_eq!(format_group_spec(&ctx), spec);
        }
        assert!(parse_group_spec("free").is_err());
        assert!(parse_group_spec("simple:5").is_err());
        assert!(parse_group_spec("free:x").is_err());
    }

    #[test]
    fn word_parsing_normalizes() {
        let ctx = GroupContext::free(2).unwrap();
        let g = ctx.parse_element("a b b^-1 a").unwrap();
        assert_eq!(ctx.format(&g), "a^2");
        let h = ctx.parse_element("a*b^-2").unwrap();
        assert_eq!(ctx.format(&h), "ab^-2");
        assert!(ctx.parse_element("c").is_err());
        assert!(ctx.parse_element("ae").is_err());
        assert!(ctx.parse_element("").is_err());
    }

    #[test]
    fn zd_parsing_forms_agree() {
        let ctx = GroupContext::zd(2).unwrap();
        let tuple = ctx.parse_element("(2,-1)").unwrap();
        let word = ctx.parse_element("e1^2e2^-1").unwrap();
        assert_eq!(tuple, word);
        assert!(ctx.parse_element("(1,2,3)").is_err());
        assert!(ctx.parse_element("e3").is_err());
        assert!(ctx.parse_element("(1,").is_err());
    }

    #[test]
    fn element_text_round_trips() {
        let ctx = GroupContext::free(3).unwrap();
        for text in ["e", "a", "ab^-1c", "a^-4b^2", "cba"] {
            let g = ctx.parse_element(text).unwrap();
            assert_eq!(ctx.parse_element(&ctx.format(&g)).unwrap(), g);
        }
        let zd = GroupContext::zd(1).unwrap();
        let g = zd.parse_element("(-7)").unwrap();
        assert_eq!(zd.format(&g), "(-7)");
    }

    #[test]
    fn multiset_literals() {
        let ctx = GroupContext::free(2).unwrap();
        let spec = parse_multiset_spec(&ctx, "[a, a^-1, b, b^-1]").unwrap();
        assert_eq!(spec.base.size(), 4);
        assert_eq!(spec.power, 1);
        assert_eq!(
            spec.base.weighted(&ctx).unwrap(),
            ctx.standard_symmetric().weighted(&ctx).unwrap()
        );

        let spec = parse_multiset_spec(&ctx, "std^9").unwrap();
        assert_eq!(spec.power, 9);

        let zd = GroupContext::zd(2).unwrap();
        let spec = parse_multiset_spec(&zd, "[(1,0),(0,1),(-1,0),(0,-1)]").unwrap();
        assert_eq!(
            spec.base.weighted(&zd).unwrap(),
            zd.standard_symmetric().weighted(&zd).unwrap()
        );

        // ^ inside an entry is not a power suffix.
        let spec = parse_multiset_spec(&ctx, "[a^-1]").unwrap();
        assert_eq!(spec.power, 1);

        assert!(parse_multiset_spec(&ctx, "[]").is_err());
        assert!(parse_multiset_spec(&ctx, "std^0").is_err());
        assert!(parse_multiset_spec(&ctx, "whatever").is_err());
    }
}
