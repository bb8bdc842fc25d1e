#include <tfhe/tfhe.h>

#define RELU_WIDTH 8

/* input/result: RELU_WIDTH encrypted bits, two's complement, LSB first.
 * ReLU via sign-bit select: negative values map to encrypted zero. */
void encrypted_relu(LweSample* result, const LweSample* input,
                    const TFheGateBootstrappingCloudKeySet* bk) {
    const LweSample* sign = &input[RELU_WIDTH - 1];
    LweSample* zero = new_gate_bootstrapping_ciphertext(bk->params);
    bootsCONSTANT(zero, 0, bk);
    for (int i = 0; i < RELU_WIDTH; i++) {
        bootsMUX(&result[i], sign, zero, &input[i], bk);
    }
    delete_gate_bootstrapping_ciphertext(zero);
}
