/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    epoch(): number;
    frameRateHz(): number;
    nChannels(): number;
    constructor(seed: number, snr: number);
    segment(threshold: number): Uint8Array;
    signal(channel: number): Float32Array;
    sweep(): Float64Array;
    trace(): Float64Array;
    trainEpoch(): number;
    truth(): Uint8Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_epoch: (a: number) => number;
    readonly demo_frameRateHz: (a: number) => number;
    readonly demo_nChannels: (a: number) => number;
    readonly demo_new: (a: number, b: number) => [number, number, number];
    readonly demo_segment: (a: number, b: number) => [number, number];
    readonly demo_signal: (a: number, b: number) => [number, number];
    readonly demo_sweep: (a: number) => [number, number, number, number];
    readonly demo_trace: (a: number) => [number, number];
    readonly demo_trainEpoch: (a: number) => [number, number, number];
    readonly demo_truth: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
