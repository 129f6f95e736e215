//! Scoped flush-to-zero for training loops.
//!
//! Weights behind a dead ReLU channel get no data gradient, so weight decay
//! alone walks them towards zero. Their products with small gradients land in
//! the subnormal range, and on x86 every such operand costs a microcode
//! assist: a full-resolution epoch ran 6x slower once that happened.

/// Flushes subnormal results and operands to zero on the current thread while
/// alive; restores the previous floating-point mode on drop. A no-op on
/// targets other than x86_64 and aarch64.
#[must_use = "the mode is restored when the guard is dropped"]
pub struct FlushDenormals {
    #[cfg_attr(not(any(target_arch = "x86_64", target_arch = "aarch64")), allow(dead_code))]
    saved: u64,
}

impl FlushDenormals {
    #[cfg(target_arch = "x86_64")]
    pub fn new() -> Self {
        // MXCSR bit 15: flush-to-zero, bit 6: denormals-are-zero
        let mut saved = 0u32;
        let on;
        // SAFETY: only the FTZ/DAZ control bits change; no exception masks.
        unsafe {
            std::arch::asm!("stmxcsr [{}]", in(reg) &mut saved, options(nostack, preserves_flags));
            on = saved | 0x8040;
            std::arch::asm!("ldmxcsr [{}]", in(reg) &on, options(nostack, preserves_flags));
        }
        FlushDenormals { saved: saved as u64 }
    }

    #[cfg(target_arch = "aarch64")]
    pub fn new() -> Self {
        // FPCR bit 24: flush-to-zero for inputs and results
        let saved: u64;
        // SAFETY: only the FZ control bit changes.
        unsafe {
            std::arch::asm!("mrs {}, fpcr", out(reg) saved, options(nomem, nostack, preserves_flags));
            std::arch::asm!("msr fpcr, {}", in(reg) saved | (1 << 24), options(nomem, nostack, preserves_flags));
        }
        FlushDenormals { saved }
    }

    #[cfg(not(any(target_arch = "x86_64", target_arch = "aarch64")))]
    pub fn new() -> Self {
        FlushDenormals { saved: 0 }
    }
}

impl Default for FlushDenormals {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for FlushDenormals {
    fn drop(&mut self) {
        // SAFETY: restores the mode captured in `new`.
        #[cfg(target_arch = "x86_64")]
        unsafe {
            let saved = self.saved as u32;
            std::arch::asm!("ldmxcsr [{}]", in(reg) &saved, options(nostack, preserves_flags));
        }
        #[cfg(target_arch = "aarch64")]
        unsafe {
            std::arch::asm!("msr fpcr, {}", in(reg) self.saved, options(nomem, nostack, preserves_flags));
        }
    }
}
