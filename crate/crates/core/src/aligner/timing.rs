use num_rational::Ratio;

use super::AlignError;

/// Exact rational used for seconds and rates.
pub type Rational = Ratio<i64>;

/// Audio and tokenizer facts needed to turn frames into speech tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AudioMeta {
    /// `M`, number of audio samples.
    pub sample_count: i64,
    /// `sr`, samples per second.
    pub sample_rate: i64,
    /// `T`, number of emission frames.
    pub frame_count: usize,
    /// `tr`, speech tokens per second.
    pub token_rate: Rational,
}

impl AudioMeta {
    pub fn validate(&self) -> Result<(), AlignError> {
        let bad = |m: &str| Err(AlignError::InvalidMeta(m.into()));
        if self.sample_count <= 0 {
            return bad("sample count must be positive");
        }
        if self.sample_rate <= 0 {
            return bad("sample rate must be positive");
        }
        if self.frame_count == 0 {
            return bad("frame count must be positive");
        }
        if self.token_rate <= Rational::from_integer(0) {
            return bad("token rate must be positive");
        }
        Ok(())
    }

    /// Samples per frame, `M / T`.
    pub fn ratio(&self) -> Rational {
        Rational::new(self.sample_count, self.frame_count as i64)
    }

    /// `⌊M · f / T⌋`.
    pub fn samples_at(&self, frame: usize) -> i64 {
        let num = self.sample_count as i128 * frame as i128;
        (num / self.frame_count as i128) as i64
    }
}

/// `s = ⌊ratio · f⌋ / sr` for both ends of a frame range.
pub fn frame_to_time(f_start: usize, f_end: usize, meta: &AudioMeta) -> Result<(Rational, Rational), AlignError> {
    meta.validate()?;
    if f_start >= f_end || f_end > meta.frame_count {
        return Err(AlignError::InvalidFrameRange { start: f_start, end: f_end, frames: meta.frame_count });
    }
    let sr = meta.sample_rate;
    Ok((Rational::new(meta.samples_at(f_start), sr), Rational::new(meta.samples_at(f_end), sr)))
}

fn floor_mul(a: Rational, b: Rational) -> i64 {
    let num = *a.numer() as i128 * *b.numer() as i128;
    let den = *a.denom() as i128 * *b.denom() as i128;
    num.div_euclid(den) as i64
}

fn ceil_mul(a: Rational, b: Rational) -> i64 {
    let num = *a.numer() as i128 * *b.numer() as i128;
    let den = *a.denom() as i128 * *b.denom() as i128;
    -((-num).div_euclid(den)) as i64
}

/// `(⌊s_start · tr⌋, ⌈s_end · tr⌉)`. An empty result is logged as a warning.
pub fn time_to_speech_tokens(
    s_start: Rational,
    s_end: Rational,
    token_rate: Rational,
) -> Result<(i64, i64), AlignError> {
    let zero = Rational::from_integer(0);
    for s in [s_start, s_end] {
        if s < zero {
            return Err(AlignError::NegativeTime(s.to_string()));
        }
    }
    if token_rate <= zero {
        return Err(AlignError::InvalidMeta("token rate must be positive".into()));
    }
    if s_start > s_end {
        return Err(AlignError::InvalidMeta(format!("time range {s_start}..{s_end} is reversed")));
    }
    let range = (floor_mul(s_start, token_rate), ceil_mul(s_end, token_rate));
    if range.0 >= range.1 {
        log::warn!("time range {s_start}..{s_end} s maps to empty speech-token range {range:?}");
    }
    Ok(range)
}

/// Parses `25`, `12.5` or `25/2` into an exact rate.
pub fn parse_rate(s: &str) -> Result<Rational, AlignError> {
    let bad = || AlignError::InvalidMeta(format!("cannot parse rate {s:?}"));
    let s = s.trim();
    let r = if let Some((n, d)) = s.split_once('/') {
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        Rational::new(n.trim().parse().map_err(|_| bad())?, d)
    } else if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let scale = 10i64.pow(frac.len() as u32);
        let whole: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let f: i64 = frac.parse().map_err(|_| bad())?;
        Rational::new(whole.checked_mul(scale).and_then(|w| w.checked_add(f)).ok_or_else(bad)?, scale)
    } else {
        Rational::from_integer(s.parse().map_err(|_| bad())?)
    };
    if r <= Rational::from_integer(0) {
        return Err(AlignError::InvalidMeta(format!("rate {s} must be positive")));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(m: i64, t: usize) -> AudioMeta {
        AudioMeta { sample_count: m, sample_rate: 16000, frame_count: t, token_rate: Rational::from_integer(25) }
    }

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn frames_to_seconds() {
        let (s0, s1) = frame_to_time(10, 20, &meta(16000, 50)).unwrap();
        assert_eq!(s0, r(1, 5));
        assert_eq!(s1, r(2, 5));
        assert_eq!(frame_to_time(0, 1, &meta(16000, 50)).unwrap().0, r(0, 1));
        assert_eq!(frame_to_time(10, 11, &meta(16001, 50)).unwrap().0, r(1, 5));
        assert!(frame_to_time(3, 3, &meta(16000, 50)).is_err());
        assert!(frame_to_time(0, 51, &meta(16000, 50)).is_err());
    }

    #[test]
    fn seconds_to_tokens() {
        let tr = Rational::from_integer(25);
        assert_eq!(time_to_speech_tokens(r(1, 5), r(46, 100), tr), Ok((5, 12)));
        assert_eq!(time_to_speech_tokens(r(0, 1), r(0, 1), tr), Ok((0, 0)));
        assert_eq!(time_to_speech_tokens(r(1, 25), r(1, 25), tr), Ok((1, 1)));
        assert!(matches!(time_to_speech_tokens(r(-1, 5), r(1, 5), tr), Err(AlignError::NegativeTime(_))));
    }

    #[test]
    fn rates() {
        assert_eq!(parse_rate("25").unwrap(), r(25, 1));
        assert_eq!(parse_rate("12.5").unwrap(), r(25, 2));
        assert_eq!(parse_rate("50/3").unwrap(), r(50, 3));
        assert!(parse_rate("0").is_err());
        assert!(parse_rate("-2").is_err());
        assert!(parse_rate("x").is_err());
        assert!(parse_rate("1/0").is_err());
    }
}
