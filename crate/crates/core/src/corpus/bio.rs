/// One tag of a BIO-encoded sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BioTag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> BioTag<'a> {
    /// `None` when the string is not `O`, `B-X` or `I-X` with a non-empty `X`.
    pub fn parse(tag: &'a str) -> Option<Self> {
        if tag == "O" {
            return Some(BioTag::Outside);
        }
        let (prefix, ty) = tag.split_once('-')?;
        if ty.is_empty() {
            return None;
        }
        match prefix {
            "B" => Some(BioTag::Begin(ty)),
            "I" => Some(BioTag::Inside(ty)),
            _ => None,
        }
    }

    pub fn entity_type(&self) -> Option<&'a str> {
        match self {
            BioTag::Outside => None,
            BioTag::Begin(t) | BioTag::Inside(t) => Some(t),
        }
    }
}

/// An `I-X` is valid only after `B-X` or `I-X`.
pub fn is_valid_bio<S: AsRef<str>>(tags: &[S]) -> bool {
    let mut prev: Option<&str> = None;
    for t in tags {
        match BioTag::parse(t.as_ref()) {
            None => return false,
            Some(BioTag::Outside) => prev = None,
            Some(BioTag::Begin(ty)) => prev = Some(ty),
            Some(BioTag::Inside(ty)) => {
                if prev != Some(ty) {
                    return false;
                }
            }
        }
    }
    true
}

/// Promotes every orphan `I-X` to `B-X`; returns the number of repairs.
/// Tags that are not BIO-shaped are left alone.
pub fn repair_bio(tags: &mut [String]) -> usize {
    let mut repairs = 0;
    let mut prev: Option<String> = None;
    for t in tags.iter_mut() {
        let next = match BioTag::parse(t) {
            Some(BioTag::Inside(ty)) if prev.as_deref() != Some(ty) => {
                let ty = ty.to_string();
                *t = format!("B-{ty}");
                repairs += 1;
                Some(ty)
            }
            Some(tag) => tag.entity_type().map(str::to_string),
            None => None,
        };
        prev = next;
    }
    repairs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_shapes() {
        assert_eq!(BioTag::parse("O"), Some(BioTag::Outside));
        assert_eq!(BioTag::parse("B-PER"), Some(BioTag::Begin("PER")));
        assert_eq!(BioTag::parse("I-B-X"), Some(BioTag::Inside("B-X")));
        assert_eq!(BioTag::parse("NOUN"), None);
        assert_eq!(BioTag::parse("B-"), None);
        assert_eq!(BioTag::parse("E-PER"), None);
    }

    #[test]
    fn repairs_orphans() {
        let mut t: Vec<String> = ["I-LOC", "I-LOC", "O", "I-PER", "B-ORG", "I-PER"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(repair_bio(&mut t), 3);
        assert_eq!(t, ["B-LOC", "I-LOC", "O", "B-PER", "B-ORG", "B-PER"]);
        assert!(is_valid_bio(&t));
    }
}
