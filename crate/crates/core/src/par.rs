/// How independent work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses rayon when built with the `parallel` feature, otherwise sequential.
    #[default]
    Parallel,
}

pub(crate) fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v: Vec<u32> = (0..100).collect();
        let seq = map(Exec::Sequential, &v, |x| x * 2);
        let par = map(Exec::Parallel, &v, |x| x * 2);
        assert_eq!(seq, par);
        assert_eq!(seq[99], 198);
    }
}
