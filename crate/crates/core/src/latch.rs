// SPDX-License-Identifier: Apache-2.0

//! Transparent D-latches: the plain latch and the masking variants.
//!
//! A masking latch presents a fixed level on each output while its internal state is
//! metastable: mask-0 outputs read 0, mask-1 outputs read 1. The later resolution shows
//! up as at most one transition per output. A plain latch drives X instead.

use serde::{Deserialize, Serialize};

use crate::kernel::{Component, Ctx, DiagKind, Logic, MetaOutcome, MetastabilityEvent, NetId, NetlistBuilder, SimError, Ticks};
use crate::timing::{sample_resolution, MetastabilityConfig, ResolutionDraw, TimingProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LatchVariant {
    /// Standard latch, single output, X while metastable.
    Plain,
    /// Single output masking to 0.
    Mask0,
    /// Single output masking to 1.
    Mask1,
    /// Two outputs: `q0` masks to 0, `q1` masks to 1.
    Mask01,
}

impl LatchVariant {
    /// Level each output shows while the latch is metastable.
    pub fn masked_levels(self) -> &'static [Logic] {
        match self {
            LatchVariant::Plain => &[Logic::X],
            LatchVariant::Mask0 => &[Logic::L0],
            LatchVariant::Mask1 => &[Logic::L1],
            LatchVariant::Mask01 => &[Logic::L0, Logic::L1],
        }
    }

    pub fn outputs(self) -> usize {
        self.masked_levels().len()
    }

    pub fn output_names(self) -> &'static [&'static str] {
        match self {
            LatchVariant::Plain => &["q"],
            LatchVariant::Mask0 => &["q0"],
            LatchVariant::Mask1 => &["q1"],
            LatchVariant::Mask01 => &["q0", "q1"],
        }
    }

    pub fn is_masking(self) -> bool {
        self != LatchVariant::Plain
    }
}

/// Level of the enable at which the latch is transparent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transparent {
    High,
    Low,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatchState {
    Stable(Logic),
    Metastable { entered_at: Ticks, resolution: ResolutionDraw },
}

/// Ports: `d, en` (plus `rst_n` when built with an asynchronous active-low reset).
#[derive(Clone, Debug)]
pub struct Latch {
    variant: LatchVariant,
    transparent: Transparent,
    instance: String,
    ctq: Ticks,
    meta: MetastabilityConfig,
    has_reset: bool,
    init: Logic,
    state: LatchState,
    cycle: u64,
    open: Option<(Ticks, Logic, bool)>,
    meta_log: Option<usize>,
    generation: u64,
}

const HOLD_TAG: u64 = 1;
const RESOLVE_BASE: u64 = 1 << 32;

impl Latch {
    pub fn new(
        instance: &str,
        variant: LatchVariant,
        transparent: Transparent,
        ctq: Ticks,
        meta: MetastabilityConfig,
        init: Logic,
        has_reset: bool,
    ) -> Result<Latch, SimError> {
        meta.validate()?;
        if ctq <= meta.setup + meta.hold {
            return Err(SimError::Config(format!("{instance}: clock-to-q must exceed setup + hold")));
        }
        Ok(Latch {
            variant,
            transparent,
            instance: instance.to_string(),
            ctq,
            meta,
            has_reset,
            init,
            state: LatchState::Stable(init),
            cycle: 0,
            open: None,
            meta_log: None,
            generation: 0,
        })
    }

    pub fn state(&self) -> LatchState {
        self.state
    }

    fn masking(&self) -> bool {
        self.variant.is_masking() && self.meta.enabled
    }

    fn is_transparent(&self, en: Logic) -> bool {
        match self.transparent {
            Transparent::High => en == Logic::L1,
            Transparent::Low => en == Logic::L0,
        }
    }

    /// Output levels for a stored level (X stands for an ambiguous or metastable node).
    fn levels(&self, v: Logic) -> Vec<Logic> {
        if v.is_x() && self.masking() {
            self.variant.masked_levels().to_vec()
        } else {
            vec![v; self.variant.outputs()]
        }
    }

    fn state_levels(&self) -> Vec<Logic> {
        match self.state {
            LatchState::Stable(v) => self.levels(v),
            LatchState::Metastable { .. } => self.levels(Logic::X),
        }
    }

    fn emit(&self, ctx: &mut Ctx<'_>, at: Ticks, v: Logic) -> Result<(), SimError> {
        for (p, l) in self.levels(v).into_iter().enumerate() {
            ctx.drive(p, at, l)?;
        }
        Ok(())
    }

    fn decide(&mut self, ctx: &mut Ctx<'_>, t: Ticks, v: Logic, violated: bool) -> Result<(), SimError> {
        let cycle = self.cycle;
        self.cycle += 1;
        if !violated || !self.meta.enabled {
            self.state = LatchState::Stable(v);
            return self.emit(ctx, t + self.ctq, v);
        }
        let r = sample_resolution(&self.meta, &self.instance, cycle);
        let out_at = t + self.ctq;
        let resolve_at = out_at + r.delay.max(Ticks(1));
        for p in 0..self.variant.outputs() {
            ctx.cancel_from(p, (t + self.ctq).saturating_sub(self.meta.setup));
        }
        self.emit(ctx, out_at, Logic::X)?;
        self.emit(ctx, resolve_at, r.value)?;
        self.generation += 1;
        ctx.wake_at(resolve_at, RESOLVE_BASE + self.generation)?;
        self.state = LatchState::Metastable { entered_at: t, resolution: r };
        self.meta_log = Some(ctx.log_metastability(MetastabilityEvent {
            instance: self.instance.clone(),
            cycle,
            entered_at: t,
            delay: r.delay,
            value: r.value,
            forced: r.forced,
            outcome: MetaOutcome::Resolved,
        }));
        Ok(())
    }

    fn choke_off(&mut self, ctx: &mut Ctx<'_>) {
        if let LatchState::Metastable { .. } = self.state {
            let now = ctx.now();
            for p in 0..self.variant.outputs() {
                ctx.cancel_from(p, now);
            }
            if let Some(i) = self.meta_log.take() {
                ctx.metastability_mut(i).outcome = MetaOutcome::ChokedOff { at: now };
            }
            ctx.diagnose(DiagKind::ChokeOff, "reopened while metastable; pending resolution dropped");
            self.generation += 1;
            self.state = LatchState::Stable(Logic::X);
        }
    }

    fn track(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        let d = ctx.input(0);
        self.state = LatchState::Stable(d);
        let at = ctx.now() + self.ctq;
        self.emit(ctx, at, d)
    }
}

impl Component for Latch {
    fn kind(&self) -> &'static str {
        match self.variant {
            LatchVariant::Plain => "latch",
            LatchVariant::Mask0 => "mask0_latch",
            LatchVariant::Mask1 => "mask1_latch",
            LatchVariant::Mask01 => "mask01_latch",
        }
    }

    fn ports(&self) -> (usize, usize) {
        (2 + self.has_reset as usize, self.variant.outputs())
    }

    fn min_delay(&self) -> Option<Ticks> {
        Some(self.ctq)
    }

    fn settle(&mut self, inputs: &[Logic]) -> Vec<Logic> {
        if self.has_reset && inputs[2] == Logic::L0 {
            self.state = LatchState::Stable(Logic::L0);
        } else if self.is_transparent(inputs[1]) && !inputs[0].is_x() {
            self.state = LatchState::Stable(inputs[0]);
        } else {
            self.state = LatchState::Stable(self.init);
        }
        self.state_levels()
    }

    fn react(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        let now = ctx.now();
        if ctx.input(1).is_x() {
            return Err(ctx.error(format!("X on latch enable {}", ctx.input_net_name(1))));
        }
        if ctx.changed(0) {
            if let Some((t, _, ref mut bad)) = self.open {
                if now > t && now <= t + self.meta.hold && self.meta.enabled {
                    *bad = true;
                }
            }
        }
        for &tag in ctx.wakes().to_vec().iter() {
            if tag == HOLD_TAG {
                if let Some((t, v, bad)) = self.open.take() {
                    self.decide(ctx, t, v, bad)?;
                }
            } else if tag == RESOLVE_BASE + self.generation {
                if let LatchState::Metastable { resolution, .. } = self.state {
                    self.state = LatchState::Stable(resolution.value);
                    self.meta_log = None;
                }
            }
        }

        if self.has_reset {
            match ctx.input(2) {
                Logic::L0 => {
                    if ctx.changed(2) {
                        self.choke_off(ctx);
                        self.open = None;
                        self.state = LatchState::Stable(Logic::L0);
                        self.emit(ctx, now + self.ctq, Logic::L0)?;
                    }
                    return Ok(());
                }
                Logic::X => return Err(ctx.error("X on latch reset")),
                Logic::L1 => {
                    if ctx.changed(2) && self.is_transparent(ctx.input(1)) {
                        return self.track(ctx);
                    }
                }
            }
        }

        let en = ctx.input(1);
        let was = self.is_transparent(ctx.prev_input(1));
        let is = self.is_transparent(en);
        if was && !is {
            // closing edge
            let d = ctx.input(0);
            let lc = ctx.last_change(0);
            let in_setup = lc > Ticks::ZERO && lc >= now.saturating_sub(self.meta.setup);
            let violated = d.is_x() || in_setup;
            if self.meta.hold > Ticks::ZERO {
                self.open = Some((now, d, violated));
                ctx.wake_at(now + self.meta.hold, HOLD_TAG)?;
            } else {
                self.decide(ctx, now, d, violated)?;
            }
        } else if !was && is {
            if let Some((t, v, bad)) = self.open.take() {
                self.decide(ctx, t, v, bad)?;
            }
            self.choke_off(ctx);
            self.track(ctx)?;
        } else if is && ctx.changed(0) {
            self.track(ctx)?;
        }
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn Component> {
        Box::new(self.clone())
    }
}

/// Adds a latch named `name`; outputs are nets `name.q` (plain), `name.q0` / `name.q1` (masking).
#[allow(clippy::too_many_arguments)]
pub fn latch(
    b: &mut NetlistBuilder,
    tp: &TimingProfile,
    name: &str,
    variant: LatchVariant,
    transparent: Transparent,
    d: NetId,
    en: NetId,
    rst_n: Option<NetId>,
) -> Result<Vec<NetId>, SimError> {
    latch_init(b, tp, name, variant, transparent, d, en, rst_n, Logic::L0)
}

/// [`latch`] with an explicit power-up level for the stored value.
#[allow(clippy::too_many_arguments)]
pub fn latch_init(
    b: &mut NetlistBuilder,
    tp: &TimingProfile,
    name: &str,
    variant: LatchVariant,
    transparent: Transparent,
    d: NetId,
    en: NetId,
    rst_n: Option<NetId>,
    init: Logic,
) -> Result<Vec<NetId>, SimError> {
    let inst = b.local(name);
    let meta = if variant.is_masking() { tp.masking_meta() } else { tp.standard_meta() };
    let l = Latch::new(&inst, variant, transparent, tp.ctq(&inst), meta, init, rst_n.is_some())?;
    let outs: Vec<NetId> = variant.output_names().iter().map(|o| b.local_net(&format!("{name}.{o}"))).collect();
    let mut ins = vec![d, en];
    ins.extend(rst_n);
    b.add(name, l, &ins, &outs)?;
    Ok(outs)
}
