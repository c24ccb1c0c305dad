//! Immutable singly linked stack with shared tails.

use alloc::sync::Arc;
use alloc::vec::Vec;

#[derive(Debug)]
struct Frame<T> {
    item: T,
    below: Option<Arc<Frame<T>>>,
    len: usize,
}

#[derive(Debug)]
pub struct PStack<T> {
    head: Option<Arc<Frame<T>>>,
}

impl<T> Clone for PStack<T> {
    fn clone(&self) -> Self {
        PStack { head: self.head.clone() }
    }
}

impl<T> Default for PStack<T> {
    fn default() -> Self {
        PStack { head: None }
    }
}

impl<T> PStack<T> {
    pub fn new() -> Self {
        PStack { head: None }
    }

    pub fn push(&self, item: T) -> Self {
        let len = self.len() + 1;
        PStack { head: Some(Arc::new(Frame { item, below: self.head.clone(), len })) }
    }

    pub fn peek(&self) -> Option<&T> {
        self.head.as_deref().map(|f| &f.item)
    }

    /// The stack without its top element; `None` when empty.
    pub fn pop(&self) -> Option<(&T, PStack<T>)> {
        self.head
            .as_deref()
            .map(|f| (&f.item, PStack { head: f.below.clone() }))
    }

    pub fn len(&self) -> usize {
        self.head.as_deref().map_or(0, |f| f.len)
    }

    pub fn is_empty(&self) -> bool {
        self.head.is_none()
    }

    /// Iterates from the top down.
    pub fn iter(&self) -> Iter<'_, T> {
        Iter { next: self.head.as_deref() }
    }

    /// Elements bottom-to-top.
    pub fn to_vec(&self) -> Vec<T>
    where
        T: Clone,
    {
        let mut v: Vec<T> = self.iter().cloned().collect();
        v.reverse();
        v
    }
}

pub struct Iter<'a, T> {
    next: Option<&'a Frame<T>>,
}

impl<'a, T> Iterator for Iter<'a, T> {
    type Item = &'a T;

    fn next(&mut self) -> Option<&'a T> {
        self.next.map(|f| {
            self.next = f.below.as_deref();
            &f.item
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_pop_shares_tails() {
        let a = PStack::new().push(1).push(2);
        let b = a.push(3);
        let c = a.push(4);
        assert_eq!(b.to_vec(), [1, 2, 3]);
        assert_eq!(c.to_vec(), [1, 2, 4]);
        let (top, rest) = b.pop().unwrap();
        assert_eq!(*top, 3);
        assert_eq!(rest.len(), 2);
        assert!(PStack::<i32>::new().pop().is_none());
    }
}
