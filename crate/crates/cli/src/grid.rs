//! Argument parsers for grids, `(M, N)` pairs and `key=value` overrides.

/// A parsed dB grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// A parsed list of `(M, N)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairs(pub Vec<(usize, usize)>);

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    grid_values(s).map(Grid)
}

pub fn parse_pairs(s: &str) -> Result<Pairs, String> {
    pair_values(s).map(Pairs)
}

/// `start:stop:step` (inclusive of `stop` up to rounding) or `a,b,c`.
fn grid_values(s: &str) -> Result<Vec<f64>, String> {
    let number = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(format!("expected start:stop:step, got '{s}'"));
        };
        let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
        if !(step > 0.0) || !(stop >= start) {
            return Err(format!("'{s}' needs stop >= start and a positive step"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        // multiplying rather than accumulating keeps 0.1-type steps exact-ish
        Ok((0..=count).map(|i| start + step * i as f64).collect())
    } else {
        s.split(',').map(number).collect()
    }
}

/// `MxN[,MxN...]`.
fn pair_values(s: &str) -> Result<Vec<(usize, usize)>, String> {
    s.split(',')
        .map(|p| {
            let (m, n) = p.trim().split_once(['x', 'X']).ok_or_else(|| format!("expected MxN, got '{p}'"))?;
            let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("'{t}' is not a count"));
            Ok((parse(m)?, parse(n)?))
        })
        .collect()
}

/// `key=value`; the value is later parsed as JSON.
pub fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    if k.trim().is_empty() {
        return Err(format!("empty key in '{s}'"));
    }
    Ok((k.trim().to_string(), v.trim().to_string()))
}
