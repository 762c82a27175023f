/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_field_free: (a: number, b: number) => void;
export const __wbg_whitneydemo_free: (a: number, b: number) => void;
export const bandFrame: (a: number, b: number) => [number, number];
export const field_hi: (a: number) => number;
export const field_lo: (a: number) => number;
export const field_res: (a: number) => number;
export const field_values: (a: number) => [number, number];
export const smoothPreset: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const whitneydemo_edges: (a: number) => [number, number];
export const whitneydemo_field: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const whitneydemo_new: (a: number) => [number, number, number];
export const whitneydemo_points: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_start: () => void;
