//! Partition-based selection: quickselect with median-of-three pivots,
//! falling back to heap selection when recursion depth runs out.
//!
//! Average cost is linear in the slice length; the fallback caps the worst
//! case at `O(n log n)`.

const INSERTION_CUTOFF: usize = 16;

/// Reorders `v` so that `v[nth]` holds the element that would sit at `nth`
/// after sorting by `less`, everything before it is not greater and
/// everything after it is not smaller.
///
/// # Panics
///
/// Panics if `nth >= v.len()`.
pub fn select_nth_by<T, F>(v: &mut [T], nth: usize, mut less: F)
where
    F: FnMut(&T, &T) -> bool,
{
    assert!(nth < v.len(), "select index {nth} out of range {}", v.len());
    let mut lo = 0;
    let mut hi = v.len();
    let mut depth = 2 * (usize::BITS - v.len().leading_zeros()) as usize;
    loop {
        let len = hi - lo;
        if len <= INSERTION_CUTOFF {
            insertion_sort(&mut v[lo..hi], &mut less);
            return;
        }
        if depth == 0 {
            heap_select(&mut v[lo..hi], nth - lo, &mut less);
            return;
        }
        depth -= 1;

        let pivot = median_of_three(v, lo, lo + len / 2, hi - 1, &mut less);
        let store = partition(&mut v[lo..hi], pivot - lo, &mut less) + lo;
        match nth.cmp(&store) {
            std::cmp::Ordering::Equal => return,
            std::cmp::Ordering::Less => hi = store,
            std::cmp::Ordering::Greater => lo = store + 1,
        }
    }
}

fn median_of_three<T, F>(v: &[T], a: usize, b: usize, c: usize, less: &mut F) -> usize
where
    F: FnMut(&T, &T) -> bool,
{
    let ab = less(&v[a], &v[b]);
    let bc = less(&v[b], &v[c]);
    if ab == bc {
        return b;
    }
    let ac = less(&v[a], &v[c]);
    if ab == ac {
        c
    } else {
        a
    }
}

/// Lomuto partition around `v[pivot]`; returns the pivot's final position.
fn partition<T, F>(v: &mut [T], pivot: usize, less: &mut F) -> usize
where
    F: FnMut(&T, &T) -> bool,
{
    let last = v.len() - 1;
    v.swap(pivot, last);
    let mut store = 0;
    for i in 0..last {
        if less(&v[i], &v[last]) {
            v.swap(i, store);
            store += 1;
        }
    }
    v.swap(store, last);
    store
}

fn insertion_sort<T, F>(v: &mut [T], less: &mut F)
where
    F: FnMut(&T, &T) -> bool,
{
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && less(&v[j], &v[j - 1]) {
            v.swap(j, j - 1);
            j -= 1;
        }
    }
}

/// Keeps a max-heap of the `m + 1` smallest elements seen so far in
/// `v[..=m]`, then moves its root to position `m`.
fn heap_select<T, F>(v: &mut [T], m: usize, less: &mut F)
where
    F: FnMut(&T, &T) -> bool,
{
    let heap_len = m + 1;
    for i in (0..heap_len / 2).rev() {
        sift_down(&mut v[..heap_len], i, less);
    }
    for i in heap_len..v.len() {
        if less(&v[i], &v[0]) {
            v.swap(i, 0);
            sift_down(&mut v[..heap_len], 0, less);
        }
    }
    v.swap(0, m);
}

fn sift_down<T, F>(heap: &mut [T], mut node: usize, less: &mut F)
where
    F: FnMut(&T, &T) -> bool,
{
    loop {
        let left = 2 * node + 1;
        if left >= heap.len() {
            return;
        }
        let right = left + 1;
        let child = if right < heap.len() && less(&heap[left], &heap[right]) {
            right
        } else {
            left
        };
        if !less(&heap[node], &heap[child]) {
            return;
        }
        heap.swap(node, child);
        node = child;
    }
}
