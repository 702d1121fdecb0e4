//! Non-learned fusion: pixel-wise majority vote, boolean expressions over
//! named masks, and a 3x3 median post-filter.

mod expr;

pub use expr::{eval_expr, parse_expr, FusionExpr};

use crate::{Error, Mask, Plane, Result, BACKGROUND, FOREGROUND};

/// Binary masks of identical size, each bound to a name.
#[derive(Clone, Debug)]
pub struct MaskSet {
    names: Vec<String>,
    masks: Vec<Mask>,
}

/// Default name of the `i`-th input: `A`..`Z`, then `M26`, `M27`, ...
pub fn default_name(i: usize) -> String {
    if i < 26 {
        ((b'A' + i as u8) as char).to_string()
    } else {
        format!("M{i}")
    }
}

impl MaskSet {
    pub fn new(named: Vec<(String, Mask)>) -> Result<Self> {
        let first = named
            .first()
            .ok_or_else(|| Error::InvalidInput("mask set must contain at least one mask".into()))?
            .1
            .clone();
        let mut names = Vec::with_capacity(named.len());
        let mut masks = Vec::with_capacity(named.len());
        for (name, mask) in named {
            mask.ensure_same_dims(&first, "mask set")?;
            mask.ensure_binary(&format!("mask `{name}`"))?;
            if names.contains(&name) {
                return Err(Error::InvalidInput(format!("duplicate mask name `{name}`")));
            }
            names.push(name);
            masks.push(mask);
        }
        Ok(Self { names, masks })
    }

    /// Names the masks `A`, `B`, `C`, ... in order.
    pub fn from_masks(masks: Vec<Mask>) -> Result<Self> {
        Self::new(
            masks
                .into_iter()
                .enumerate()
                .map(|(i, m)| (default_name(i), m))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Mask> {
        self.names.iter().position(|n| n == name).map(|i| &self.masks[i])
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dims(&self) -> (usize, usize) {
        self.masks[0].dims()
    }
}

/// Foreground where at least `floor(N/2) + 1` masks vote foreground, so an
/// even split is background.
pub fn majority_vote(set: &MaskSet) -> Mask {
    let (w, h) = set.dims();
    let quorum = set.len() / 2 + 1;
    let mut votes = vec![0usize; w * h];
    for m in set.masks() {
        for (v, &p) in votes.iter_mut().zip(m.data()) {
            *v += (p == FOREGROUND) as usize;
        }
    }
    let data = votes
        .into_iter()
        .map(|v| if v >= quorum { FOREGROUND } else { BACKGROUND })
        .collect();
    Plane::new(w, h, data).expect("dims carried over")
}

/// 3x3 majority filter with edge replication. Pixels equal to 255 count as
/// foreground.
pub fn median_filter3(mask: &Mask) -> Mask {
    let (w, h) = mask.dims();
    Plane::from_fn(w, h, |x, y| {
        let mut count = 0;
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                count += (mask.get(sx, sy) == FOREGROUND) as usize;
            }
        }
        if count >= 5 {
            FOREGROUND
        } else {
            BACKGROUND
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: usize, bits: &[u8]) -> Mask {
        Plane::new(w, bits.len() / w, bits.iter().map(|&b| b * 255).collect()).unwrap()
    }

    #[test]
    fn three_way_vote() {
        let set = MaskSet::from_masks(vec![mask(2, &[1, 0]), mask(2, &[1, 1]), mask(2, &[0, 0])]).unwrap();
        assert_eq!(majority_vote(&set), mask(2, &[1, 0]));
    }

    #[test]
    fn single_mask_vote_is_identity() {
        let m = mask(3, &[1, 0, 1, 0, 0, 1]);
        assert_eq!(majority_vote(&MaskSet::from_masks(vec![m.clone()]).unwrap()), m);
    }

    #[test]
    fn even_split_is_background() {
        let set = MaskSet::from_masks(vec![mask(1, &[1]), mask(1, &[0])]).unwrap();
        assert_eq!(majority_vote(&set), mask(1, &[0]));
    }

    #[test]
    fn set_validation() {
        assert!(MaskSet::from_masks(vec![]).is_err());
        assert!(MaskSet::from_masks(vec![mask(2, &[1, 0]), mask(1, &[1, 0])]).is_err());
        assert!(MaskSet::from_masks(vec![Plane::filled(1, 1, 3)]).is_err());
        assert!(MaskSet::new(vec![("A".into(), mask(1, &[1])), ("A".into(), mask(1, &[1]))]).is_err());
    }

    #[test]
    fn median_filter_cases() {
        let full = Plane::filled(4, 3, 255);
        assert_eq!(median_filter3(&full), full);
        let mut speck = Plane::filled(5, 5, 0);
        speck.set(2, 2, 255);
        assert_eq!(median_filter3(&speck), Plane::filled(5, 5, 0));
    }

    #[test]
    fn default_names() {
        assert_eq!(default_name(0), "A");
        assert_eq!(default_name(25), "Z");
        assert_eq!(default_name(26), "M26");
    }
}
