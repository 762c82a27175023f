/* tslint:disable */
/* eslint-disable */

/**
 * A scalar field on a `res × res` grid over `[lo, hi]²`, x index slowest.
 */
export class Field {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly hi: number;
    readonly lo: number;
    readonly res: number;
    readonly values: Float64Array;
}

/**
 * Whitney 1-forms of every edge of a fan disk, kept per triangle in
 * ambient coordinates.
 */
export class WhitneyDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Edges as flattened vertex pairs, in cochain order.
     */
    edges(): Uint32Array;
    /**
     * `x, y, u, v` quadruples on an `n × n` grid over `[-1, 1]²`, for grid
     * points inside the disk.
     */
    field(cochain: Float64Array, n: number): Float64Array;
    constructor(sectors: number);
    /**
     * Vertex coordinates, flattened `x, y` pairs.
     */
    points(): Float64Array;
}

export function bandFrame(t: number, n: number): Float64Array;

export function smoothPreset(name: string, res: number, eps: number): Field[];

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_field_free: (a: number, b: number) => void;
    readonly __wbg_whitneydemo_free: (a: number, b: number) => void;
    readonly bandFrame: (a: number, b: number) => [number, number];
    readonly field_hi: (a: number) => number;
    readonly field_lo: (a: number) => number;
    readonly field_res: (a: number) => number;
    readonly field_values: (a: number) => [number, number];
    readonly smoothPreset: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly whitneydemo_edges: (a: number) => [number, number];
    readonly whitneydemo_field: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly whitneydemo_new: (a: number) => [number, number, number];
    readonly whitneydemo_points: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
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
