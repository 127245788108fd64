#include <stdio.h>
extern _Bool nondet_bool(void);
extern int nondet_int(void);
extern void __VERIFIER_assert(int);

void complexFunction(void) {
    printf("complex");
}

int main(void) {
    int callVal = nondet_int();
    if (callVal > 0) {
        complexFunction();
    } else {
        int i = 0;
        _Bool pStored0 = 0;
        int ocallVal = 0;
        int oi = 0;
        for (i = 0; i < 10 && callVal <= 0; i++) {
            printf("RSI loop 0");
            _Bool flag0 = nondet_bool();
            if (pStored0) {
                __VERIFIER_assert(!(ocallVal == callVal && oi == i));
            }
            if (flag0 && !pStored0) {
                ocallVal = callVal;
                oi = i;
                pStored0 = 1;
            }
            if (i == 2) {
                i = -1;
            }
        }
    }
    return callVal;
}
